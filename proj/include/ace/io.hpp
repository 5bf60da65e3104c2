#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ace/attribution.hpp"
#include "ace/moments.hpp"
#include "ace/netcore.hpp"
#include "ace/regressor.hpp"
#include "ace/train.hpp"

namespace ace {

using AnyNetwork = std::variant<Network, GruNetwork>;

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

std::string network_to_json(const Network& net);
std::string network_to_json(const GruNetwork& rnn);
AnyNetwork network_from_json(std::string_view text);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file so readers never see partial output.
void write_text(const std::filesystem::path& path, std::string_view text);

AnyNetwork load_network(const std::filesystem::path& path);
void save_network(const std::filesystem::path& path, const AnyNetwork& net);

/// Header row of names, then one numeric row per observation. Columns named
/// in `ignore` are dropped.
struct Table {
  std::vector<std::string> header;
  Matrix values;
};
Table parse_csv(std::string_view text, const std::vector<std::string>& ignore = {});
std::string table_to_csv(const std::vector<std::string>& header, const Matrix& values);

Dataset load_dataset(const std::filesystem::path& path, const std::vector<std::string>& ignore = {});

/// Leading `seq_id,step` columns; rows of one sequence must cover steps 0..T-1.
/// Sequences keep the order of first appearance.
SequenceDataset load_sequences(const std::filesystem::path& path, const std::vector<std::string>& ignore = {});
std::string sequences_to_csv(const SequenceDataset& data);

/// `seq_id,label` rows in sequence order.
std::vector<int> load_labels(const std::filesystem::path& path);
std::string labels_to_csv(const std::vector<int>& labels);

/// `{"feature": [low, high], ...}`.
std::map<std::string, Domain> parse_domains(std::string_view text);
void apply_domains(Dataset& data, const std::map<std::string, Domain>& domains);
void apply_domains(SequenceDataset& data, const std::map<std::string, Domain>& domains);

/// alpha, interventional_expectation, ace, predictive_variance, method. The
/// ace column uses the regressor baseline when given, else the sweep's own
/// trapezoidal baseline; predictive_variance is empty without a regressor.
std::string sweep_to_csv(const InterventionSweep& sweep, const CausalRegressor* reg = nullptr,
                         Diagnostics* diag = nullptr);

/// ACE rows at the requested alphas, preceded by a `# baseline=` comment line.
std::string ace_to_csv(const std::vector<AceResult>& rows, double baseline, Method method);

std::string regressor_to_json(const CausalRegressor& reg);

std::string matrix_to_csv(const Matrix& values);
/// Plain P2 graymap, values min-max scaled to 0..255 (all 0 if constant).
std::string matrix_to_pgm(const Matrix& values);

std::string training_log_to_csv(const TrainingLog& log);

}  // namespace ace
