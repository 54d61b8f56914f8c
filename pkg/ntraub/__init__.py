from .exceptions import *
from .ioutil import *
from .util import *
from .averages import *
from .radii import *
from .bounds import *
from .solver import *
from .problems import *

__version__ = '0.1'
