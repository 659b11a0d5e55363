# Run configuration fixtures
