"""PNG persistence for 8-bit RGB frames"""
from pathlib import Path

import numpy as np
import torch
from PIL import Image


def to_uint8(image):
    """(3, H, W) tensor in [0, 1] -> (H, W, 3) uint8 array"""
    array = image.detach().cpu().clamp(0.0, 1.0).permute(1, 2, 0).numpy()
    return np.round(array * 255.0).astype(np.uint8)


def save_png(image, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(image), mode='RGB').save(path, format='PNG', optimize=False)
    return path


def load_png(path, dtype=torch.float32):
    """Read a PNG into a (3, H, W) tensor in [0, 1]"""
    with Image.open(path) as handle:
        array = np.asarray(handle.convert('RGB'), dtype=np.uint8)
    return torch.from_numpy(array.copy()).permute(2, 0, 1).to(dtype) / 255.0
