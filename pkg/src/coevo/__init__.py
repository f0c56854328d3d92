"""Co-evolution of an affine game with a networked linear system."""
