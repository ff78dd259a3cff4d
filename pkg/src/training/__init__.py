"""
Training data synthesis, loss and optimization loop
"""
