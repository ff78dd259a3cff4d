"""
Utility functions and configuration for SurfaceFormer
"""
