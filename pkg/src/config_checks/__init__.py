# Experiment checks package