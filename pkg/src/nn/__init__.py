"""
Minimal differentiable computation core (numpy tensors with reverse-mode gradients)
"""
