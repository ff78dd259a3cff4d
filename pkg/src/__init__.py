"""
SurfaceFormer - transformer-based feature-preserving mesh denoising
"""
