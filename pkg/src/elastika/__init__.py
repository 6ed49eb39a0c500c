"""Elastic dataflow toolkit: compile CSP-style programs to handshake
networks, analyse data dependencies, insert buffers and simulate."""

__version__ = "0.1.0"
