from . import helpers
from .utils import load_image
from ..shared.io import read_stack
import tifffile
