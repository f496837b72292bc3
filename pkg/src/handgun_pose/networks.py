"""Torch modules: Darknet-53 appearance backbone, a reduced stand-in, the pose branch,
and the appearance-only / pose-fused classification heads."""
from __future__ import annotations

import torch
from torch import nn

HRC, HRC_P = "hrc", "hrc_p"
FULL, REDUCED = "full", "reduced"

REGION_SHAPE = (3, 256, 256)  # channels, height, width
POSE_SHAPE = (1, 512, 256)
N_CLASSES = 2


def conv_bn(c_in, c_out, kernel, stride=1):
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, kernel, stride, padding=kernel // 2, bias=False),
        nn.BatchNorm2d(c_out),
        nn.LeakyReLU(0.1),
    )


class DarknetResidual(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.block = nn.Sequential(conv_bn(channels, channels // 2, 1), conv_bn(channels // 2, channels, 3))

    def forward(self, x):
        return x + self.block(x)


class Darknet53(nn.Module):
    """The 52 convolutional layers of Darknet-53; the classifier head adds the 53rd."""

    out_features = 1024

    def __init__(self):
        super().__init__()
        layers = [conv_bn(3, 32, 3)]
        c = 32
        for n_blocks in (1, 2, 8, 8, 4):
            layers.append(conv_bn(c, 2 * c, 3, stride=2))
            c *= 2
            layers.extend(DarknetResidual(c) for _ in range(n_blocks))
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x):
        return torch.flatten(self.pool(self.features(x)), 1)


def strided_stack(c_in, widths):
    """Plain 3x3 stride-2 convolutions with LeakyReLU, no normalization."""
    layers = []
    for w in widths:
        layers += [nn.Conv2d(c_in, w, 3, stride=2, padding=1), nn.LeakyReLU(0.1)]
        c_in = w
    return nn.Sequential(*layers)


class ReducedBackbone(nn.Module):
    """Eight stride-2 convolutions; same interface as :class:`Darknet53`."""

    out_features = 256

    def __init__(self):
        super().__init__()
        self.features = strided_stack(3, (16, 32, 64, 64, 128, 128, 256, 256))
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x):
        return torch.flatten(self.pool(self.features(x)), 1)


class PoseBranch(nn.Module):
    """Five stride-2 convolutions (16 -> 256 channels) over a binary pose half."""

    out_features = 256

    def __init__(self):
        super().__init__()
        self.features = strided_stack(1, (16, 32, 64, 128, 256))
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x):
        return torch.flatten(self.pool(self.features(x)), 1)


def make_backbone(scale):
    if scale == FULL:
        return Darknet53()
    if scale == REDUCED:
        return ReducedBackbone()
    raise ValueError(f"unknown backbone scale {scale!r}")


class RegionClassifierNet(nn.Module):
    """Appearance-only classifier: backbone -> global pool -> 2 logits."""

    def __init__(self, backbone_scale=REDUCED):
        super().__init__()
        self.appearance = make_backbone(backbone_scale)
        self.head = nn.Linear(self.appearance.out_features, N_CLASSES)

    def forward(self, region, pose=None):
        return self.head(self.appearance(region))


class PoseFusedClassifierNet(nn.Module):
    """Two branches whose pooled features are concatenated before one linear layer."""

    def __init__(self, backbone_scale=REDUCED):
        super().__init__()
        self.appearance = make_backbone(backbone_scale)
        self.pose = PoseBranch()
        self.head = nn.Linear(self.appearance.out_features + self.pose.out_features, N_CLASSES)

    def forward(self, region, pose):
        return self.head(torch.cat([self.appearance(region), self.pose(pose)], dim=1))


def build_network(variant, backbone_scale=REDUCED) -> nn.Module:
    if variant == HRC:
        return RegionClassifierNet(backbone_scale)
    if variant == HRC_P:
        return PoseFusedClassifierNet(backbone_scale)
    raise ValueError(f"unknown variant {variant!r}")
