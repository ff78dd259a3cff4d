"""
Triangle meshes: representation, file I/O, patching and test shapes
"""
