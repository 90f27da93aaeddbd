"""Grid traffic-signal control lab: queue simulator, graph-attention DQN
agents, inequity-aversion reward shaping, and coefficient sweeps."""

__version__ = "0.1.0"
