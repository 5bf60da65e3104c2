#include "ace/cli.hpp"

#include <charconv>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "ace/attribution.hpp"
#include "ace/io.hpp"
#include "ace/regressor.hpp"
#include "ace/train.hpp"

namespace ace::cli {

namespace {

namespace fs = std::filesystem;

struct InputFlags {
  std::string net;
  std::string data;
  std::string domains;
  std::vector<std::string> ignore;
};

struct SweepFlags {
  std::string feature;
  std::optional<Index> step;
  std::optional<Index> out_step;
  Index num = 50;
  std::string method = "exact";
  std::optional<double> low;
  std::optional<double> high;
  Index output_index = 0;
  double eps = kDefaultSecondDifferenceStep;
  unsigned threads = 0;
};

void add_input_flags(CLI::App* cmd, InputFlags& f) {
  cmd->add_option("--net", f.net, "Network document (JSON)")->required();
  cmd->add_option("--data", f.data, "Observations CSV (sequence CSV for recurrent networks)")->required();
  cmd->add_option("--domains", f.domains, "Sidecar JSON of per-feature [low, high]");
  cmd->add_option("--ignore-column", f.ignore, "Data columns to drop (repeatable)");
}

void add_sweep_flags(CLI::App* cmd, SweepFlags& f, bool needs_feature) {
  auto* feature = cmd->add_option("--feature", f.feature, "Intervened input: column name or index");
  if (needs_feature) feature->required();
  cmd->add_option("--step", f.step, "Intervened time step (recurrent networks)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out-step", f.out_step, "Output time step (recurrent networks)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--num", f.num, "Grid size")->check(CLI::Range(Index{2}, Index{1000000}));
  cmd->add_option("--method", f.method, "exact | approx | oracle")
      ->check(CLI::IsMember({"exact", "approx", "oracle"}));
  cmd->add_option("--low", f.low, "Lower end of the intervention domain");
  cmd->add_option("--high", f.high, "Upper end of the intervention domain");
  cmd->add_option("--output-index", f.output_index, "Network output neuron")->check(CLI::NonNegativeNumber);
  cmd->add_option("--eps", f.eps, "Second-difference step of the approximate method")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", f.threads, "Worker threads (0: ACE_THREADS or all cores)");
}

struct Inputs {
  AnyNetwork net;
  std::optional<Dataset> table;
  std::optional<SequenceDataset> sequences;
};

Inputs load_inputs(const InputFlags& f) {
  Inputs in{load_network(f.net), std::nullopt, std::nullopt};
  std::map<std::string, Domain> domains;
  if (!f.domains.empty()) domains = parse_domains(read_text(f.domains));
  if (std::holds_alternative<Network>(in.net)) {
    in.table = load_dataset(f.data, f.ignore);
    apply_domains(*in.table, domains);
  } else {
    in.sequences = load_sequences(f.data, f.ignore);
    apply_domains(*in.sequences, domains);
  }
  return in;
}

Index resolve_feature(const std::vector<std::string>& names, const std::string& feature) {
  const auto it = std::find(names.begin(), names.end(), feature);
  if (it != names.end()) return it - names.begin();
  Index idx = -1;
  const auto res = std::from_chars(feature.data(), feature.data() + feature.size(), idx);
  if (res.ec == std::errc() && res.ptr == feature.data() + feature.size() && idx >= 0 &&
      idx < static_cast<Index>(names.size()))
    return idx;
  throw Error(ErrorCode::invalid_argument, "unknown feature '" + feature + "'");
}

SweepOptions sweep_options(const SweepFlags& f) {
  SweepOptions o;
  o.num = f.num;
  o.method = parse_method(f.method);
  o.eps = f.eps;
  o.threads = f.threads;
  return o;
}

std::optional<Domain> domain_override(const SweepFlags& f, const Domain& fallback) {
  if (!f.low && !f.high) return std::nullopt;
  return Domain{f.low.value_or(fallback.low), f.high.value_or(fallback.high)};
}

InterventionSweep run_sweep(const Inputs& in, const SweepFlags& f, Diagnostics* diag) {
  SweepOptions opts = sweep_options(f);
  if (in.table) {
    const Index i = resolve_feature(in.table->feature_names, f.feature);
    opts.domain = domain_override(f, in.table->domains[static_cast<std::size_t>(i)]);
    return sweep_feedforward(std::get<Network>(in.net), *in.table, i, f.output_index, opts, diag);
  }
  const SequenceDataset& data = *in.sequences;
  const Index i = resolve_feature(data.feature_names, f.feature);
  const Index step = f.step.value_or(0);
  const Index t_out = f.out_step.value_or(data.min_length() - 1);
  opts.domain = domain_override(f, data.slot_domain(step, i));
  return sweep_recurrent(std::get<GruNetwork>(in.net), data, i, step, t_out, f.output_index, opts, diag);
}

int cmd_sweep(const InputFlags& in_flags, const SweepFlags& f, const std::string& output, std::ostream& out,
              Diagnostics* diag) {
  const InterventionSweep sweep = run_sweep(load_inputs(in_flags), f, diag);
  write_text(output, sweep_to_csv(sweep, nullptr, diag));
  out << "wrote " << sweep.grid.alphas.size() << " rows to " << output << "\n";
  return ok;
}

struct AceFlags {
  int max_order = 10;
  std::optional<int> order;
  std::vector<double> alpha_at;
  std::string regressor;
  std::string sweep_output;
};

int cmd_ace(const InputFlags& in_flags, const SweepFlags& f, const AceFlags& a, const std::string& output,
            std::ostream& out, Diagnostics* diag) {
  const InterventionSweep sweep = run_sweep(load_inputs(in_flags), f, diag);
  RegressorOptions ro;
  ro.max_order = a.max_order;
  ro.order = a.order;
  const CausalRegressor reg = fit_causal_regressor(sweep.grid.alphas, sweep.ie, sweep.grid.domain, ro, diag);
  std::vector<double> alphas = a.alpha_at;
  if (alphas.empty()) alphas.assign(sweep.grid.alphas.data(), sweep.grid.alphas.data() + sweep.grid.alphas.size());
  std::vector<AceResult> rows;
  for (double alpha : alphas) rows.push_back(ace_at(reg, alpha, diag));
  write_text(output, ace_to_csv(rows, reg.baseline, sweep.method));
  write_text(a.regressor.empty() ? output + ".regressor.json" : a.regressor, regressor_to_json(reg));
  if (!a.sweep_output.empty()) write_text(a.sweep_output, sweep_to_csv(sweep, &reg, diag));
  out << "order " << reg.order << ", baseline " << format_double(reg.baseline) << "\n";
  return ok;
}

struct SaliencyFlags {
  Index instance = 0;
  std::string pgm;
  bool positive_only = false;
};

int cmd_saliency(const InputFlags& in_flags, const SweepFlags& f, const AceFlags& a, const SaliencyFlags& s,
                 const std::string& output, std::ostream& out, Diagnostics* diag) {
  const Inputs in = load_inputs(in_flags);
  SaliencyOptions opts;
  opts.sweep = sweep_options(f);
  opts.regressor.max_order = a.max_order;
  opts.regressor.order = a.order;
  opts.positive_only = s.positive_only;
  Matrix map;
  if (in.table) {
    if (s.instance < 0 || s.instance >= in.table->size())
      throw Error(ErrorCode::invalid_argument, "--instance outside the dataset");
    const Vector row = in.table->rows.row(s.instance).transpose();
    map = saliency(std::get<Network>(in.net), *in.table, row, f.output_index, opts, diag).transpose();
  } else {
    if (s.instance < 0 || s.instance >= in.sequences->size())
      throw Error(ErrorCode::invalid_argument, "--instance outside the dataset");
    Matrix seq = in.sequences->sequences[static_cast<std::size_t>(s.instance)];
    if (f.out_step) {
      if (*f.out_step >= seq.rows()) throw Error(ErrorCode::invalid_argument, "--out-step beyond the instance");
      seq = seq.topRows(*f.out_step + 1).eval();
    }
    map = saliency(std::get<GruNetwork>(in.net), *in.sequences, seq, f.output_index, opts, diag);
  }
  write_text(output, matrix_to_csv(map));
  if (!s.pgm.empty()) write_text(s.pgm, matrix_to_pgm(map));
  out << "wrote " << map.rows() << "x" << map.cols() << " saliency map to " << output << "\n";
  return ok;
}

struct TauFlags {
  Index out_step = 0;
  std::optional<Index> output_index;
  double tol = 1e-8;
  std::string output;
};

int cmd_tau(const InputFlags& in_flags, const TauFlags& t, std::ostream& out) {
  const Inputs in = load_inputs(in_flags);
  if (!in.sequences) throw Error(ErrorCode::invalid_argument, "tau needs a recurrent network");
  const TauResult r = tau(std::get<GruNetwork>(in.net), *in.sequences, t.out_step, t.output_index, t.tol);
  if (!t.output.empty()) {
    std::string csv = "sequence,lag\n";
    for (std::size_t s = 0; s < r.per_sequence.size(); ++s)
      csv += std::to_string(s) + "," + std::to_string(r.per_sequence[s]) + "\n";
    write_text(t.output, csv);
  }
  out << r.tau << "\n";
  return ok;
}

struct TrainFlags {
  std::string kind = "mlp";
  std::string data;
  std::string labels;
  std::string label_column;
  std::vector<Index> hidden{16};
  std::string activation = "tanh";
  std::optional<Index> epochs;
  std::optional<double> lr;
  std::optional<double> update_bias;
  std::uint64_t seed = 0;
  bool normalize = false;
  std::string normalized_data;
  std::string output;
  std::string log;
};

int cmd_train(const TrainFlags& t, std::ostream& out) {
  TrainingLog log;
  AnyNetwork net = Network({DenseLayer<double>{Matrix::Zero(1, 1), Vector::Zero(1), Activation::identity}});
  double final_accuracy = 0.0;
  if (t.kind == "mlp") {
    if (t.label_column.empty()) throw Error(ErrorCode::invalid_argument, "mlp training needs --label-column");
    Table table = parse_csv(read_text(t.data));
    const Index lc = resolve_feature(table.header, t.label_column);
    std::vector<int> labels;
    int classes = 0;
    for (Index r = 0; r < table.values.rows(); ++r) {
      const double v = table.values(r, lc);
      if (v != std::floor(v) || v < 0) throw Error(ErrorCode::parse, "label column must hold class indices");
      labels.push_back(static_cast<int>(v));
      classes = std::max(classes, labels.back() + 1);
    }
    std::vector<std::string> names;
    Matrix features(table.values.rows(), table.values.cols() - 1);
    for (Index c = 0, d = 0; c < table.values.cols(); ++c) {
      if (c == lc) continue;
      names.push_back(table.header[static_cast<std::size_t>(c)]);
      features.col(d++) = table.values.col(c);
    }
    if (t.normalize) features = min_max_normalize(features);
    if (!t.normalized_data.empty()) write_text(t.normalized_data, table_to_csv(names, features));
    MlpTrainOptions o;
    o.layer_sizes.push_back(features.cols());
    o.layer_sizes.insert(o.layer_sizes.end(), t.hidden.begin(), t.hidden.end());
    o.layer_sizes.push_back(classes);
    o.hidden_activation = parse_activation(t.activation);
    o.epochs = t.epochs.value_or(o.epochs);
    o.learning_rate = t.lr.value_or(o.learning_rate);
    o.seed = t.seed;
    const Network trained = train_mlp(features, labels, o, &log);
    final_accuracy = accuracy(predict_classes(trained, features), labels);
    net = trained;
  } else {
    if (t.labels.empty()) throw Error(ErrorCode::invalid_argument, "gru training needs --labels");
    const SequenceDataset data = load_sequences(t.data);
    const std::vector<int> labels = load_labels(t.labels);
    GruTrainOptions o;
    o.hidden_dim = t.hidden.empty() ? 1 : t.hidden.front();
    o.epochs = t.epochs.value_or(o.epochs);
    o.learning_rate = t.lr.value_or(o.learning_rate);
    o.update_bias = t.update_bias.value_or(o.update_bias);
    o.seed = t.seed;
    const GruNetwork trained = train_gru(data, labels, o, &log);
    final_accuracy = accuracy(predict_labels(trained, data), labels);
    net = trained;
  }
  save_network(t.output, net);
  if (!t.log.empty()) write_text(t.log, training_log_to_csv(log));
  out << "train accuracy " << format_double(final_accuracy) << "\n";
  return ok;
}

int cmd_synth(Index n, std::uint64_t seed, const std::string& output, const std::string& labels, std::ostream& out) {
  const LabelledSequences s = synth_sequences(n, seed);
  write_text(output, sequences_to_csv(s.data));
  write_text(labels, labels_to_csv(s.labels));
  out << "wrote " << n << " sequences to " << output << "\n";
  return ok;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::parse:
    case ErrorCode::io: return file_error;
    case ErrorCode::invalid_argument: return bad_flags;
    case ErrorCode::ill_conditioned: return ill_conditioned_fit;
    default: return numerical_error;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal attributions for feed-forward and recurrent networks", "ace"};
  app.require_subcommand(1);

  InputFlags in_flags;
  SweepFlags sweep_flags;
  AceFlags ace_flags;
  SaliencyFlags sal_flags;
  TauFlags tau_flags;
  TrainFlags train_flags;
  std::string output;
  Index synth_n = 1000;
  std::uint64_t synth_seed = 0;
  std::string synth_labels;

  auto* sweep = app.add_subcommand("sweep", "Interventional expectations over a grid");
  add_input_flags(sweep, in_flags);
  add_sweep_flags(sweep, sweep_flags, true);
  sweep->add_option("--output", output, "Sweep CSV")->required();

  auto* ace = app.add_subcommand("ace", "Causal regressor and ACE values");
  add_input_flags(ace, in_flags);
  add_sweep_flags(ace, sweep_flags, true);
  ace->add_option("--max-order", ace_flags.max_order, "Largest polynomial order")->check(CLI::Range(0, 30));
  ace->add_option("--order", ace_flags.order, "Fixed polynomial order (skips model selection)")
      ->check(CLI::Range(0, 30));
  ace->add_option("--alpha-at", ace_flags.alpha_at, "Intervention values to report (default: the grid)");
  ace->add_option("--regressor", ace_flags.regressor, "Regressor JSON (default: OUTPUT.regressor.json)");
  ace->add_option("--sweep-output", ace_flags.sweep_output, "Also write the sweep CSV");
  ace->add_option("--output", output, "ACE CSV")->required();

  auto* sal = app.add_subcommand("saliency", "ACE of every input at one instance");
  add_input_flags(sal, in_flags);
  add_sweep_flags(sal, sweep_flags, false);
  sal->add_option("--max-order", ace_flags.max_order, "Largest polynomial order")->check(CLI::Range(0, 30));
  sal->add_option("--instance", sal_flags.instance, "Row or sequence index of the instance")
      ->check(CLI::NonNegativeNumber);
  sal->add_option("--pgm", sal_flags.pgm, "Also write a P2 graymap");
  sal->add_flag("--positive-only", sal_flags.positive_only, "Clamp negative attributions to zero");
  sal->add_option("--output", output, "Saliency CSV")->required();

  auto* tau_cmd = app.add_subcommand("tau", "Lookback window of a recurrent network");
  add_input_flags(tau_cmd, in_flags);
  tau_cmd->add_option("--out-step", tau_flags.out_step, "Output time step")->required()->check(CLI::NonNegativeNumber);
  tau_cmd->add_option("--output-index", tau_flags.output_index, "Restrict to one output neuron");
  tau_cmd->add_option("--tol", tau_flags.tol, "Dependence threshold")->check(CLI::PositiveNumber);
  tau_cmd->add_option("--output", tau_flags.output, "Per-sequence lag CSV");

  auto* train = app.add_subcommand("train", "Train a classifier");
  train->add_option("--kind", train_flags.kind, "mlp | gru")->check(CLI::IsMember({"mlp", "gru"}));
  train->add_option("--data", train_flags.data, "Training CSV")->required();
  train->add_option("--labels", train_flags.labels, "seq_id,label CSV (gru)");
  train->add_option("--label-column", train_flags.label_column, "Class-index column (mlp)");
  train->add_option("--hidden", train_flags.hidden, "Hidden layer sizes");
  train->add_option("--activation", train_flags.activation, "Hidden activation (mlp)");
  train->add_option("--epochs", train_flags.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  train->add_option("--lr", train_flags.lr, "Learning rate")->check(CLI::PositiveNumber);
  train->add_option("--update-bias", train_flags.update_bias, "Initial update-gate bias (gru)");
  train->add_option("--seed", train_flags.seed, "Initialisation seed");
  train->add_flag("--normalize", train_flags.normalize, "Min-max scale features to [0, 1]");
  train->add_option("--normalized-data", train_flags.normalized_data, "Write the scaled feature CSV");
  train->add_option("--log", train_flags.log, "Training log CSV");
  train->add_option("--output", train_flags.output, "Network JSON")->required();

  auto* synth = app.add_subcommand("synth", "Generate labelled synthetic sequences");
  synth->add_option("--n", synth_n, "Number of sequences")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--output", output, "Sequence CSV")->required();
  synth->add_option("--labels", synth_labels, "Label CSV")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n" << (subs.empty() ? app.help() : subs.front()->help());
    return bad_flags;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  Diagnostics diag;
  int code = ok;
  try {
    if (name == "sweep") code = cmd_sweep(in_flags, sweep_flags, output, out, &diag);
    else if (name == "ace") code = cmd_ace(in_flags, sweep_flags, ace_flags, output, out, &diag);
    else if (name == "saliency") code = cmd_saliency(in_flags, sweep_flags, ace_flags, sal_flags, output, out, &diag);
    else if (name == "tau") code = cmd_tau(in_flags, tau_flags, out);
    else if (name == "train") code = cmd_train(train_flags, out);
    else code = cmd_synth(synth_n, synth_seed, output, synth_labels, out);
  } catch (const Error& e) {
    code = exit_code_for(e);
    err << name << ": " << to_string(e.code()) << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    code = numerical_error;
    err << name << ": " << e.what() << "\n";
  }
  for (const auto& w : diag.warnings()) err << "warning: " << w << "\n";
  return code;
}

}  // namespace ace::cli
