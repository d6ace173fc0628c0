import matplotlib

# no display in test runs
matplotlib.use('Agg')
