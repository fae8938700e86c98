"""
Toy conditional noise predictor ε_Φ(x_t, t, y, view).

A small encoder-decoder UNet with skip connections. Timestep, class label
and view bucket embeddings are summed into one conditioning vector that
every residual block adds to its features. Index `len(labels)` is the null
label ∅ and index `len(VIEW_BUCKETS)` means "no view given".
"""
import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from apps.scene.cameras import VIEW_BUCKETS


def timestep_embedding(t, dim):
    """Sinusoidal embedding of (continuous) timesteps [B] -> [B, dim]"""
    half = dim // 2
    frequencies = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=t.dtype, device=t.device) / half)
    angles = t.unsqueeze(-1) * frequencies.unsqueeze(0)
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)


class ResBlock(nn.Module):
    def __init__(self, in_channels, out_channels, cond_dim, groups=8):
        super().__init__()
        self.norm1 = nn.GroupNorm(min(groups, in_channels), in_channels)
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.cond = nn.Linear(cond_dim, out_channels)
        self.norm2 = nn.GroupNorm(min(groups, out_channels), out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.skip = nn.Conv2d(in_channels, out_channels, 1) if in_channels != out_channels else nn.Identity()

    def forward(self, x, cond):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.cond(cond)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class DenoiserModel(nn.Module):
    """
    Noise predictor for 3-channel images in model space [-1, 1].

    With the default widths (32/64/128) the network has roughly one
    million parameters.
    """

    def __init__(self, labels, image_size=32, base_channels=32, num_steps=1000):
        super().__init__()
        if image_size % 4:
            raise ValueError('image_size must be divisible by 4')
        self.labels = list(labels)
        self.image_size = image_size
        self.base_channels = base_channels
        self.num_steps = num_steps
        self.trained = False

        c1, c2, c3 = base_channels, base_channels * 2, base_channels * 4
        cond_dim = base_channels * 4
        self.time_mlp = nn.Sequential(
            nn.Linear(base_channels, cond_dim), nn.SiLU(), nn.Linear(cond_dim, cond_dim),
        )
        self.label_embedding = nn.Embedding(len(self.labels) + 1, cond_dim)
        self.view_embedding = nn.Embedding(len(VIEW_BUCKETS) + 1, cond_dim)

        self.conv_in = nn.Conv2d(3, c1, 3, padding=1)
        self.down1 = ResBlock(c1, c1, cond_dim)
        self.down2 = ResBlock(c1, c2, cond_dim)
        self.down3 = ResBlock(c2, c3, cond_dim)
        self.mid = ResBlock(c3, c3, cond_dim)
        self.up2 = ResBlock(c3 + c2, c2, cond_dim)
        self.up1 = ResBlock(c2 + c1, c1, cond_dim)
        self.norm_out = nn.GroupNorm(min(8, c1), c1)
        self.conv_out = nn.Conv2d(c1, 3, 3, padding=1)

    @property
    def null_label(self):
        return len(self.labels)

    @property
    def null_view(self):
        return len(VIEW_BUCKETS)

    def label_index(self, label):
        """Index for a label name; None selects ∅"""
        if label is None:
            return self.null_label
        return self.labels.index(label)

    def view_index(self, bucket):
        if bucket is None:
            return self.null_view
        return VIEW_BUCKETS.index(bucket)

    def forward(self, x, t, label_idx, view_idx):
        """
        Args:
            x: Noised images [B, 3, H, W]
            t: Timesteps in [0, 1] [B]
            label_idx: Label indices [B]
            view_idx: View-bucket indices [B]

        Returns:
            Predicted noise [B, 3, H, W]
        """
        cond = self.time_mlp(timestep_embedding(t * self.num_steps, self.base_channels))
        cond = cond + self.label_embedding(label_idx) + self.view_embedding(view_idx)

        h1 = self.down1(self.conv_in(x), cond)
        h2 = self.down2(F.avg_pool2d(h1, 2), cond)
        h3 = self.down3(F.avg_pool2d(h2, 2), cond)
        h = self.mid(h3, cond)
        h = self.up2(torch.cat([F.interpolate(h, scale_factor=2.0, mode='nearest'), h2], dim=1), cond)
        h = self.up1(torch.cat([F.interpolate(h, scale_factor=2.0, mode='nearest'), h1], dim=1), cond)
        return self.conv_out(F.silu(self.norm_out(h)))

    def architecture(self):
        return {
            'labels': self.labels,
            'image_size': self.image_size,
            'base_channels': self.base_channels,
            'num_steps': self.num_steps,
        }
