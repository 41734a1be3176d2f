"""packrigid tests."""
