pattern = r"import\s+(\w+)"
blob = b"from bytes import nothing"
raw_doc = r"""
import raw_hidden
"""
import regex
