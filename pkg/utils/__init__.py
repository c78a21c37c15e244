# Shared helpers: numerics, errors, timing
