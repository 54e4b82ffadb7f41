"""
Foveate - filter an image file for a fixation point and viewing geometry
"""
from typing import Optional

from core.csf_model import ModelParamSet
from core.file_manager import FileManager
from core.foveate import FoveationOptions, FoveationResult, ViewingConfig, dump_pyramid, foveate_image
from core.units import DisplayGeometry
from utils.logger import setup_logger
from utils.scene import natural_scene

logger = setup_logger(__name__)


class ImageFoveator:
    def __init__(self, model: ModelParamSet, options: FoveationOptions):
        self.model = model
        self.options = options

    @staticmethod
    def load_image(path: Optional[str]):
        if path is None:
            logger.info("No input given; using the bundled synthetic scene")
            return natural_scene()
        return FileManager.load_png(path)

    def run(self, image, gaze, output: Optional[str] = None, ppd: Optional[float] = None,
            display: Optional[DisplayGeometry] = None,
            dump_dir: Optional[str] = None) -> FoveationResult:
        """
        Args:
            image: (H, W, 3) uint8/uint16 array
            gaze: "center" or an (x, y) pixel pair
            ppd: image ppd override
            display: display geometry when ppd is not given
        """
        if gaze == "center":
            view = ViewingConfig.centred(image.shape, display, ppd)
        else:
            view = ViewingConfig(image.shape[:2], gaze, display, ppd)

        result = foveate_image(image, view, self.model, self.options)
        if output:
            FileManager.save_png(result.image, output)
            logger.info(f"Wrote filtered image to {output}")
        if dump_dir:
            dump_pyramid(result, dump_dir)
        return result
