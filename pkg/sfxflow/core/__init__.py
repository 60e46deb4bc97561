from .sfx_resource import *
from .sfx_generator import *
from .sfx_stage import *
from .sfx_state import *
from .sfx_manager import *
