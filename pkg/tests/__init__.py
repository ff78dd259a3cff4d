"""
Test suite for SurfaceFormer.
"""
