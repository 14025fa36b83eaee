# Tests for optimal-adams
