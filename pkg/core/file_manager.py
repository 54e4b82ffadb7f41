import os
import json

import cv2
import numpy as np

from core.exceptions import ColorSpaceError


class FileManager:
    @staticmethod
    def save_json(data, path):
        FileManager.make_parent(path)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=4)

    @staticmethod
    def save_csv(df, path):
        FileManager.make_parent(path)
        df.to_csv(path, index=False)

    @staticmethod
    def make_folder(path):
        os.makedirs(path, exist_ok=True)

    @staticmethod
    def make_parent(path):
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)

    @staticmethod
    def load_png(path) -> np.ndarray:
        """Read an 8- or 16-bit image as (H, W, 3) RGB; grey images are expanded"""
        img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise FileNotFoundError(f"Cannot read image: {path}")
        if img.dtype not in (np.uint8, np.uint16):
            raise ColorSpaceError(f"{path}: unsupported bit depth ({img.dtype})")
        if img.ndim == 2:
            return np.repeat(img[:, :, None], 3, axis=2)
        if img.shape[2] == 4:
            img = img[:, :, :3]
        return np.ascontiguousarray(img[:, :, ::-1])

    @staticmethod
    def save_png(img, path):
        """Write an (H, W, 3) RGB or (H, W) uint8/uint16 array"""
        FileManager.make_parent(path)
        img = np.asarray(img)
        if img.ndim == 3:
            img = img[:, :, ::-1]
        if not cv2.imwrite(str(path), np.ascontiguousarray(img)):
            raise OSError(f"Cannot write image: {path}")
