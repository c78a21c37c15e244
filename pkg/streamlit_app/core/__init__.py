# Core modules for state management and pipeline execution
