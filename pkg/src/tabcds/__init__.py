"""
tabcds - Conservative data sharing for multi-task offline RL on tabular MDPs.
"""

__version__ = "0.3.0"
__author__ = "tabcds developers"
