from .grid_domain import *
from .atomic_model import *
from .noise_engine import *
from .bloch_solver import *
from .field_solver import *
from .spontaneous_oracle import *
