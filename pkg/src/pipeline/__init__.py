"""
End-to-end inference, vertex refinement and evaluation metrics
"""
