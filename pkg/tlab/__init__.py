from tlab.__version__ import __version__
