# import commented_out
#from nothing import here
import xarray  # import trailing_comment_is_ignored
    # import indented_comment
