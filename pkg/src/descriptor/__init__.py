"""
Local Surface Descriptors: polar frames, geodesic sampling and normalization
"""
