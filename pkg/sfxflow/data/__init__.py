from .lib import *
from .sfx_data_manager import *
