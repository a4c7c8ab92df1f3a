"""Style-conditioned parallel text-to-mel synthesis toolkit.

Library layout:

- ``styletts.dsp``        audio I/O, mel/F0/energy extraction, Griffin-Lim,
  acoustic feature measurement
- ``styletts.alignment``  monotonic alignment search and duration bookkeeping
- ``styletts.masbackend`` reference / native MAS backend selection
- ``styletts.nets``       neural modules (encoders, aligner, decoder, predictors)
- ``styletts.losses``     training objectives and loss reports
- ``styletts.augment``    duration-invariant time-stretch augmentation
- ``styletts.train``      pre-training and the two training stages
- ``styletts.synth``      inference: synthesis and voice conversion
- ``styletts.evalsuite``  acoustic-feature correlation and style separability
- ``styletts.cli``        command line entry points
"""

__version__ = "0.1.0"
