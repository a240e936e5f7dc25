from ._fishctl import *  # noqa: F401,F403
from ._fishctl import __doc__  # noqa: F401
