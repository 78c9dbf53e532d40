# graphnls - NLS on compact metric graphs

__version__ = "0.1.0"
