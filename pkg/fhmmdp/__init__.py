from .errors import (FhmmDpError, ParseError, EmptySeriesError, ValidationError, DegenerateClusterError,
                     TrainingError, CapacityError, AlignmentError, ReaggregationError, ConfigError, SweepCellError)
from .data import PowerSeries, StateSequence, LabeledDataset, check_alignment, split_dataset
from .external import (load_redd_channel, write_redd_channel, load_redd_house, save_labeled_dataset,
                       write_states_csv, read_states_csv, write_power_csv, save_model, load_model)
from .synth import ApplianceSpec, SynthConfig, synth_generate, load_synth_config, default_appliances
from .appliances import ApplianceModel, quantize_states, estimate_hmm_params, train_appliance, train_models, label_states
from .model import FhmmModel, build_fhmm
from .inference import viterbi_map, brute_force_map, states_to_power, path_log_likelihood
from .privacy import (PrivacyParams, SensitivityValue, laplace_sample, global_sensitivity, local_sensitivity,
                      smooth_sensitivity, perturb_states, discretize_states, baseline_aggregate_laplace,
                      baseline_hmm_resynthesis)
from .reaggregation import reaggregate_appliance, sum_appliances, fog_aggregate, privatize_states
from .evaluation import (EvaluationReport, f1_score, state_match_rate, kl_divergence, entropy, billing_error,
                         outlier_count, entropy_within_band, alpha_beta_utility, empirical_privacy_loss,
                         obfuscate, effective_epsilon, run_sweep)
from .summary import (print_results, save_results, write_report_csv, write_plot_data, compare_mechanisms,
                      entropy_band_table)
from .config import PipelineConfig, load_config
from .seeds import derive_seed, make_rng
