# Numerical modules: grid_spectral, hartree_core, time_mesh, initial_data,
# asymptotics, cauchy_solver, transforms, estimates_lab, inequalities,
# oracles, check_runner, run_store
