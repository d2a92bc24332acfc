"""Simulator and analysis toolkit for AOD-based individual optical addressing
of trapped-ion qubits: beam-spot forward models, Rabi dynamics with finite-shot
sampling, single- vs double-side crosstalk analysis, profile/flopping fits and
a camera-image pipeline.
"""

from .aod import (AodChannel, DriveTone, GhostSpotModel, ToneSet,
                  calibrate_channel, equalize_amplitudes, position_to_frequency,
                  tone_to_position, toneset_to_profile)
from .beams import (BeamProfile, GaussianSpot, OpticsConstants,
                    diffraction_limit, intensity_at, profile_extremum)
from .crosstalk import (AddressingSystem, IonChain, compare_ssa_dsa,
                        crosstalk_matrix, crosstalk_ratio, rabi_rate_at)
from .dynamics import (DecayModel, QubitSpec, ScanSystemTemplate, SequenceTiming,
                       excitation_probability, frequency_scan, sequence_duration,
                       substream, time_scan)
from .fitting import (FitResult, RabiFit, extract_slow_rabi,
                      extract_spacing_and_waist, fit_multi_gaussian,
                      fit_rabi_flopping, rabi_crosstalk)
from .imaging import (CameraImage, McpmtGeometry, cross_section,
                      intensity_crosstalk_at, map_ions_to_channels, read_pgm,
                      render_image, stitch_images, subtract_background, write_pgm)
from .scenario import ScenarioConfig, builtin_scenario_path, load_scenario

__version__ = "0.1.0"
