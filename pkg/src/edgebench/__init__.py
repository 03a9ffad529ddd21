"""Expert-guided RL benchmark engine: tasks, tuned experts, SAC with expert integration, statistics."""

__version__ = "0.1.0"
