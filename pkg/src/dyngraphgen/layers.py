import torch
from torch import nn

LEAKY_SLOPE = 0.01


def mlp(in_dim: int, hidden: int, out_dim: int, num_layers: int = 2, bias: bool = True) -> nn.Sequential:
    """Stack of ``num_layers`` dense layers with leaky-ReLU between them (none after the last)."""
    if num_layers < 1:
        raise ValueError("num_layers must be >= 1")
    dims = [in_dim] + [hidden] * (num_layers - 1) + [out_dim]
    layers = []
    for k in range(num_layers):
        layers.append(nn.Linear(dims[k], dims[k + 1], bias=bias))
        if k < num_layers - 1:
            layers.append(nn.LeakyReLU(LEAKY_SLOPE))
    return nn.Sequential(*layers)


def zero_(module: nn.Module) -> nn.Module:
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module
