s = "escaped \" quote import nothing"
t = """contains \""" still open
import not_real
"""
import shapely.geometry
