"""
Toy view-aware networks behind the learned energies.

All of them read images in model space [-1, 1] and encode relative poses as
the flattened 4x4 transform Δ produced by `pose_features`. Activations are
smooth (SiLU) so the energies stay differentiable in their inputs.
"""
import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from apps.scene.cameras import pose_features

POSE_DIM = 16


def conv_block(in_channels, out_channels, stride=1):
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1),
        nn.GroupNorm(min(8, out_channels), out_channels),
        nn.SiLU(),
    )


def mlp(in_dim, hidden, out_dim, layers):
    modules, width = [], in_dim
    for _ in range(layers):
        modules += [nn.Linear(width, hidden), nn.SiLU()]
        width = hidden
    modules.append(nn.Linear(width, out_dim))
    return nn.Sequential(*modules)


def relative_poses(targets, sources, dtype=torch.float32):
    """Stacked Δ(target, source) features [N, 16]"""
    return torch.stack([pose_features(c_j, c_i, dtype) for c_j, c_i in zip(targets, sources)])


def absolute_pose(camera, dtype=torch.float32):
    """Orbit coordinates of one camera: (cos az, sin az, cos el, sin el, radius / 3)"""
    azimuth = math.radians(camera.azimuth)
    elevation = math.radians(camera.elevation)
    return torch.tensor([
        math.cos(azimuth), math.sin(azimuth), math.cos(elevation), math.sin(elevation), camera.radius / 3.0,
    ], dtype=dtype)


class ImageEncoder(nn.Module):
    """Strided conv encoder with global pooling: [B, 3, H, W] -> [B, out_dim]"""

    def __init__(self, width=32, out_dim=128):
        super().__init__()
        self.layers = nn.Sequential(
            conv_block(3, width),
            conv_block(width, width * 2, stride=2),
            conv_block(width * 2, width * 4, stride=2),
            conv_block(width * 4, out_dim, stride=2),
        )

    def forward(self, x):
        return self.layers(x).mean(dim=(2, 3))


class PairClassifier(nn.Module):
    """
    M_CLS(x_i, x_j, Δ(c_j, c_i)) -> logit.

    Image features come from one shared encoder; the pose goes through a
    4-layer MLP of width 256. The three embeddings are concatenated and
    scored by a 3-layer head whose last layer starts at zero, so an
    untrained classifier outputs 0 for every pair.
    """

    def __init__(self, width=32, feature_dim=128, pose_hidden=256, pose_layers=4):
        super().__init__()
        self.width = width
        self.feature_dim = feature_dim
        self.pose_hidden = pose_hidden
        self.pose_layers = pose_layers
        self.encoder = ImageEncoder(width, feature_dim)
        self.pose_mlp = mlp(POSE_DIM, pose_hidden, feature_dim, pose_layers)
        self.head = nn.Sequential(
            nn.Linear(3 * feature_dim, 256), nn.SiLU(),
            nn.Linear(256, 128), nn.SiLU(),
            nn.Linear(128, 1),
        )
        nn.init.zeros_(self.head[-1].weight)
        nn.init.zeros_(self.head[-1].bias)

    def forward(self, first, second, pose):
        features = torch.cat([self.encoder(first), self.encoder(second), self.pose_mlp(pose)], dim=-1)
        return self.head(features).squeeze(-1)

    def architecture(self):
        return {
            'width': self.width,
            'feature_dim': self.feature_dim,
            'pose_hidden': self.pose_hidden,
            'pose_layers': self.pose_layers,
        }


class FiLMBlock(nn.Module):
    def __init__(self, channels, cond_dim):
        super().__init__()
        self.block = conv_block(channels, channels)
        self.film = nn.Linear(cond_dim, 2 * channels)

    def forward(self, x, cond):
        scale, shift = self.film(cond).chunk(2, dim=-1)
        return x + self.block(x) * (1 + scale[:, :, None, None]) + shift[:, :, None, None]


class ViewTranslator(nn.Module):
    """M_I2I(x_ref, Δ(c_target, c_ref)) -> predicted target view"""

    def __init__(self, width=32, pose_dim=64):
        super().__init__()
        self.width = width
        self.pose_dim = pose_dim
        self.pose_mlp = mlp(POSE_DIM, 128, pose_dim, 2)
        self.down = nn.Sequential(conv_block(3, width), conv_block(width, width * 2, stride=2))
        self.middle = nn.ModuleList([FiLMBlock(width * 2, pose_dim) for _ in range(3)])
        self.up = nn.Sequential(nn.Upsample(scale_factor=2.0, mode='nearest'), conv_block(width * 2, width))
        self.out = nn.Conv2d(width, 3, 3, padding=1)

    def forward(self, source, pose):
        cond = self.pose_mlp(pose)
        h = self.down(source)
        for block in self.middle:
            h = block(h, cond)
        return torch.tanh(self.out(self.up(h)))

    def architecture(self):
        return {'width': self.width, 'pose_dim': self.pose_dim}


class MultiViewSynth(nn.Module):
    """
    M_MVS(y, c̃) -> V views sharing one object latent.

    Each object has a learned latent code during training; at generation
    time the code is drawn from N(0, latent_std²) with a caller-supplied
    generator, so one draw yields one consistent object seen from V poses.
    """

    def __init__(self, labels, image_size=32, latent_dim=8, width=32, group_size=4,
                 camera_ranges=None, num_objects=0):
        super().__init__()
        if image_size % 8:
            raise ValueError('image_size must be divisible by 8')
        self.labels = list(labels)
        self.image_size = image_size
        self.latent_dim = latent_dim
        self.width = width
        self.group_size = group_size
        self.camera_ranges = camera_ranges or {'elevation': [0.0, 30.0], 'radius': [3.0, 3.0]}
        self.num_objects = num_objects

        self.label_embedding = nn.Embedding(len(self.labels), 32)
        self.latents = nn.Embedding(max(num_objects, 1), latent_dim)
        nn.init.normal_(self.latents.weight, std=0.1)
        self.register_buffer('latent_std', torch.ones(latent_dim))

        base = image_size // 8
        self.stem = mlp(32 + latent_dim + 5, 256, width * 4 * base * base, 2)
        self.decoder = nn.Sequential(
            nn.Upsample(scale_factor=2.0, mode='nearest'), conv_block(width * 4, width * 2),
            nn.Upsample(scale_factor=2.0, mode='nearest'), conv_block(width * 2, width),
            nn.Upsample(scale_factor=2.0, mode='nearest'), conv_block(width, width),
            nn.Conv2d(width, 3, 3, padding=1),
        )

    def decode(self, label_idx, latent, pose):
        """Per-view decoding: label [B], latent [B, L], pose [B, 5] -> [B, 3, S, S]"""
        features = torch.cat([self.label_embedding(label_idx), latent, pose], dim=-1)
        base = self.image_size // 8
        h = self.stem(features).view(-1, self.width * 4, base, base)
        return torch.tanh(self.decoder(h))

    def in_range(self, camera, tolerance=1e-6):
        low, high = self.camera_ranges['elevation']
        r_low, r_high = self.camera_ranges['radius']
        return (low - tolerance <= camera.elevation <= high + tolerance
                and r_low - tolerance <= camera.radius <= r_high + tolerance)

    def architecture(self):
        return {
            'labels': self.labels,
            'image_size': self.image_size,
            'latent_dim': self.latent_dim,
            'width': self.width,
            'group_size': self.group_size,
            'camera_ranges': self.camera_ranges,
            'num_objects': self.num_objects,
        }


def resize_views(views, size):
    if views.shape[-1] == size and views.shape[-2] == size:
        return views
    return F.interpolate(views, size=(size, size), mode='bilinear', align_corners=False)
