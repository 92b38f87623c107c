# Tests for mapless-planner
