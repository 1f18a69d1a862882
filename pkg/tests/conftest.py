import os

# The zero-noise reconstruction hook is gated behind this variable; tests
# are the only legitimate consumer.
os.environ.setdefault("TDP_UNSAFE_ZERO_NOISE", "1")
