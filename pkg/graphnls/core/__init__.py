# Discretization and solvers
