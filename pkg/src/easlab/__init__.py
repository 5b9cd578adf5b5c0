"""Speech-enhancement laboratory.

Waveform-domain enhancement trained on an intelligibility objective, spectral
baselines, a combined acoustic/electric hearing simulator, and the scoring
and listening-test machinery to compare them.
"""

__version__ = "0.1.0"

from .dsp import (DspError, FilterCascade, NoisyMixture, SampleBuffer,
                  Spectrogram, apply_filter, design_butterworth, frame_signal,
                  get_window, istft, load_wav, mix_at_snr,
                  normalize_zero_mean_unit_var, resample, resample_matrix,
                  rms, save_wav, scale_to_rms, stft)
from .stoi import (OctaveBandMatrix, SilentSignalError, StoiConfig, StoiScore,
                   band_envelopes, remove_silent_frames, segment_correlations,
                   silent_frame_mask, stoi, third_octave_matrix)
from .mmse import MmseConfig, NoisePsd, enhance_mmse, estimate_noise_psd, mmse_gain
from .nn import (Adam, DdaeModel, FcnModel, LossValue, Sgd, Tensor,
                 TrainConfig, TrainResult, TrainingDivergedError,
                 WEIGHTS_FORMAT_VERSION, ddae_enhance, ddae_model,
                 fcn_forward, fcn_model, grad_check, load_model,
                 loss_combined, loss_mse, loss_stoi, save_model, train)
from .synth import noise_track, speech_like
from .vocoder import (DEFAULT_BAND_EDGES, ChannelEnvelopes, EasVocoderConfig,
                      acoustic_path, channel_envelopes, electric_path,
                      preemphasize, save_envelopes_csv, vocode_eas)
from .evaluation import (CcrRecord, Manifest, NoiseEntry, REPORT_SCHEMA_VERSION,
                         ScoreCell, ScoreTable, TTestResult, UtteranceEntry,
                         build_manifest, ccr, condition_seed, emit_report,
                         evaluate_corpus, load_manifest, load_score_table,
                         mean_sem, method_registry, paired_t_test_one_tailed,
                         save_manifest, student_t_upper_tail, training_pairs)
from .listening import (SessionPlan, SessionStore, TrialResponse, TrialSpec,
                        aggregate_results, create_app, plan_session)

__all__ = [name for name in dir() if not name.startswith("_")]
