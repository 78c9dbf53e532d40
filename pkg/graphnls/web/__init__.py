# HTTP interface
