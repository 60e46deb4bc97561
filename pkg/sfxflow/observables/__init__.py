from .accumulator import *
from .estimators import *
from .derived import *
