"""Behavioural simulator of a programmable optoelectronic spiking neuron and its MZI synaptic mesh."""

__version__ = "0.1.0"
