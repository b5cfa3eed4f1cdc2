import importlib
import __main__

mod = importlib.import_module("dynamic_not_detected")
spec = __import__("also_dynamic")
