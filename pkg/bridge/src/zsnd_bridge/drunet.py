"""Grayscale bias-free residual U-Net denoiser backend.

The architecture matches the publicly released grayscale denoising
checkpoint (trained on AWGN with noise levels drawn from [0, 50]): a
four-scale U-Net of bias-free residual conv blocks, conditioned on a
constant noise-level map appended as a second input channel.  State-dict
key names follow the released checkpoint so it loads directly.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

DEFAULT_CHANNELS = (64, 128, 256, 512)
DEFAULT_BLOCKS = 4


class ResBlock(nn.Module):
    def __init__(self, nc: int):
        super().__init__()
        self.res = nn.Sequential(
            nn.Conv2d(nc, nc, 3, 1, 1, bias=False),
            nn.ReLU(inplace=True),
            nn.Conv2d(nc, nc, 3, 1, 1, bias=False),
        )

    def forward(self, x):
        return x + self.res(x)


class UNetRes(nn.Module):
    """Residual U-Net; in_nc includes the noise-level map channel."""

    def __init__(
        self,
        in_nc: int = 2,
        out_nc: int = 1,
        nc: tuple[int, ...] = DEFAULT_CHANNELS,
        nb: int = DEFAULT_BLOCKS,
    ):
        super().__init__()
        self.m_head = nn.Conv2d(in_nc, nc[0], 3, 1, 1, bias=False)

        def down(cin, cout):
            blocks = [ResBlock(cin) for _ in range(nb)]
            blocks.append(nn.Conv2d(cin, cout, 2, 2, 0, bias=False))
            return nn.Sequential(*blocks)

        def up(cin, cout):
            blocks = [nn.ConvTranspose2d(cin, cout, 2, 2, 0, bias=False)]
            blocks.extend(ResBlock(cout) for _ in range(nb))
            return nn.Sequential(*blocks)

        self.m_down1 = down(nc[0], nc[1])
        self.m_down2 = down(nc[1], nc[2])
        self.m_down3 = down(nc[2], nc[3])
        self.m_body = nn.Sequential(*[ResBlock(nc[3]) for _ in range(nb)])
        self.m_up3 = up(nc[3], nc[2])
        self.m_up2 = up(nc[2], nc[1])
        self.m_up1 = up(nc[1], nc[0])
        self.m_tail = nn.Conv2d(nc[0], out_nc, 3, 1, 1, bias=False)

    def forward(self, x0):
        x1 = self.m_head(x0)
        x2 = self.m_down1(x1)
        x3 = self.m_down2(x2)
        x4 = self.m_down3(x3)
        x = self.m_body(x4)
        x = self.m_up3(x + x4)
        x = self.m_up2(x + x3)
        x = self.m_up1(x + x2)
        return self.m_tail(x + x1)


class DrunetBackend:
    """Serves the pretrained network on [0, 255] images with a sigma hint.

    Images are normalized to [0, 1]; the hint becomes a constant
    sigma/255 noise map.  Spatial dims are replicate-padded to the next
    multiple of 8 for the three downsamplings and cropped afterwards.
    """

    name = "drunet"

    def __init__(
        self,
        weights_path: str,
        device: str = "cpu",
        nc: tuple[int, ...] = DEFAULT_CHANNELS,
        nb: int = DEFAULT_BLOCKS,
    ):
        self.device = torch.device(device)
        self.model = UNetRes(in_nc=2, out_nc=1, nc=nc, nb=nb)
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        if isinstance(state, dict) and "state_dict" in state:
            state = state["state_dict"]
        self.model.load_state_dict(state, strict=True)
        self.model.eval()
        self.model.to(self.device)
        for p in self.model.parameters():
            p.requires_grad_(False)

    @torch.no_grad()
    def denoise(self, image: np.ndarray, sigma: float) -> np.ndarray:
        h, w = image.shape
        x = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32) / 255.0)
        x = x.unsqueeze(0).unsqueeze(0).to(self.device)
        noise_map = torch.full_like(x, float(sigma) / 255.0)
        x = torch.cat([x, noise_map], dim=1)
        pad_h = (-h) % 8
        pad_w = (-w) % 8
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
        out = self.model(x)[0, 0, :h, :w]
        result = out.cpu().numpy().astype(np.float64) * 255.0
        return np.clip(result, 0.0, 255.0)
