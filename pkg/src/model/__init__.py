"""
SurfaceFormer network and its configuration
"""
