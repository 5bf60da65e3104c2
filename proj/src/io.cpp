#include "ace/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>
#include <unordered_map>

#include <json.hpp>

namespace ace {

using nlohmann::json;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorCode::parse, what); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Index j = 0; j < v.size(); ++j) out.push_back(v(j));
  return out;
}

Matrix matrix_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) parse_error(what + ": expected a non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) parse_error(what + ": ragged rows");
    for (Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) parse_error(what + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

Vector vector_from(const json& j, const std::string& what) {
  if (!j.is_array()) parse_error(what + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    if (!j[c].is_number()) parse_error(what + ": non-numeric entry");
    v(static_cast<Index>(c)) = j[c].get<double>();
  }
  return v;
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) parse_error(where + ": missing '" + key + "'");
  return j.at(key);
}

json layer_json(const DenseLayer<double>& layer) {
  return json{{"weights", matrix_json(layer.weights)},
              {"bias", vector_json(layer.bias)},
              {"activation", std::string(to_string(layer.activation))}};
}

DenseLayer<double> layer_from(const json& j, const std::string& where) {
  DenseLayer<double> layer;
  layer.weights = matrix_from(field(j, "weights", where), where + ".weights");
  layer.bias = vector_from(field(j, "bias", where), where + ".bias");
  const json& act = field(j, "activation", where);
  if (!act.is_string()) parse_error(where + ".activation must be a string");
  try {
    layer.activation = parse_activation(act.get<std::string>());
  } catch (const Error& e) {
    parse_error(where + ": " + e.what());
  }
  return layer;
}

json gate_json(const GruGate<double>& g) {
  return json{{"weights", matrix_json(g.weights)}, {"bias", vector_json(g.bias)}};
}

GruGate<double> gate_from(const json& j, const std::string& where) {
  return GruGate<double>{matrix_from(field(j, "weights", where), where + ".weights"),
                         vector_from(field(j, "bias", where), where + ".bias")};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view text, std::size_t line, std::size_t column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != last)
    parse_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": '" + std::string(text) +
                "' is not a number");
  return v;
}

std::vector<std::string> data_names(const Table& table, std::size_t skip) {
  return {table.header.begin() + static_cast<std::ptrdiff_t>(skip), table.header.end()};
}

}  // namespace

std::string network_to_json(const Network& net) {
  json doc;
  doc["type"] = "mlp";
  doc["layers"] = json::array();
  for (const auto& layer : net.layers()) doc["layers"].push_back(layer_json(layer));
  doc["outputs_feed_inputs"] = false;
  return doc.dump(2) + "\n";
}

std::string network_to_json(const GruNetwork& rnn) {
  const auto& p = rnn.parameters();
  json doc;
  doc["type"] = "gru";
  doc["gru"] = json{{"input_dim", p.input_dim},
                    {"hidden_dim", p.hidden_dim},
                    {"update", gate_json(p.update)},
                    {"reset", gate_json(p.reset)},
                    {"candidate", gate_json(p.candidate)},
                    {"readout", layer_json(p.readout)}};
  doc["outputs_feed_inputs"] = p.outputs_feed_inputs;
  return doc.dump(2) + "\n";
}

AnyNetwork network_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    parse_error(std::string("network document: ") + e.what());
  }
  const json& type = field(doc, "type", "network");
  if (type == "mlp") {
    const json& layers = field(doc, "layers", "network");
    if (!layers.is_array()) parse_error("network.layers must be an array");
    std::vector<DenseLayer<double>> parsed;
    for (std::size_t l = 0; l < layers.size(); ++l) parsed.push_back(layer_from(layers[l], "layers[" + std::to_string(l) + "]"));
    return Network(std::move(parsed));
  }
  if (type == "gru") {
    const json& g = field(doc, "gru", "network");
    GruParameters<double> p;
    p.input_dim = field(g, "input_dim", "gru").get<Index>();
    p.hidden_dim = field(g, "hidden_dim", "gru").get<Index>();
    p.update = gate_from(field(g, "update", "gru"), "gru.update");
    p.reset = gate_from(field(g, "reset", "gru"), "gru.reset");
    p.candidate = gate_from(field(g, "candidate", "gru"), "gru.candidate");
    p.readout = layer_from(field(g, "readout", "gru"), "gru.readout");
    p.outputs_feed_inputs = doc.value("outputs_feed_inputs", false);
    return GruNetwork(std::move(p));
  }
  parse_error("network.type must be \"mlp\" or \"gru\"");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io, "cannot move output into '" + path.string() + "': " + ec.message());
}

AnyNetwork load_network(const std::filesystem::path& path) { return network_from_json(read_text(path)); }

void save_network(const std::filesystem::path& path, const AnyNetwork& net) {
  write_text(path, std::visit([](const auto& n) { return network_to_json(n); }, net));
}

Table parse_csv(std::string_view text, const std::vector<std::string>& ignore) {
  Table table;
  std::vector<bool> keep;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    const auto fields = split_fields(line);
    if (keep.empty()) {
      for (const auto& f : fields) {
        const bool kept = std::find(ignore.begin(), ignore.end(), f) == ignore.end();
        keep.push_back(kept);
        if (kept) table.header.emplace_back(f);
      }
      for (const auto& name : ignore)
        if (std::find(fields.begin(), fields.end(), name) == fields.end())
          parse_error("ignored column '" + name + "' is not in the header");
    } else {
      if (fields.size() != keep.size())
        parse_error("line " + std::to_string(line_no) + ": expected " + std::to_string(keep.size()) + " fields, got " +
                    std::to_string(fields.size()));
      std::vector<double> row;
      for (std::size_t c = 0; c < fields.size(); ++c)
        if (keep[c]) row.push_back(parse_number(fields[c], line_no, c + 1));
      rows.push_back(std::move(row));
    }
    if (end == text.size()) break;
  }
  if (keep.empty()) parse_error("CSV has no header row");
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return table;
}

std::string table_to_csv(const std::vector<std::string>& header, const Matrix& values) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += "\n";
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) out += (c ? "," : "") + format_double(values(r, c));
    out += "\n";
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, const std::vector<std::string>& ignore) {
  Table t = parse_csv(read_text(path), ignore);
  return make_dataset(std::move(t.values), std::move(t.header));
}

SequenceDataset load_sequences(const std::filesystem::path& path, const std::vector<std::string>& ignore) {
  const Table t = parse_csv(read_text(path), ignore);
  if (t.header.size() < 3 || t.header[0] != "seq_id" || t.header[1] != "step")
    parse_error("sequence CSV must start with seq_id,step and at least one feature column");
  const Index k = static_cast<Index>(t.header.size()) - 2;
  std::vector<double> order;
  std::unordered_map<double, std::vector<Index>> rows_of;
  for (Index r = 0; r < t.values.rows(); ++r) {
    const double id = t.values(r, 0);
    auto [it, inserted] = rows_of.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(r);
  }
  std::vector<Matrix> sequences;
  for (double id : order) {
    const auto& rows = rows_of[id];
    Matrix seq = Matrix::Constant(static_cast<Index>(rows.size()), k, std::numeric_limits<double>::quiet_NaN());
    for (Index r : rows) {
      const double step = t.values(r, 1);
      if (step != std::floor(step) || step < 0 || step >= static_cast<double>(rows.size()) ||
          !std::isnan(seq(static_cast<Index>(step), 0)))
        parse_error("sequence " + format_double(id) + ": steps must cover 0.." + std::to_string(rows.size() - 1) +
                    " exactly once");
      seq.row(static_cast<Index>(step)) = t.values.row(r).tail(k);
    }
    sequences.push_back(std::move(seq));
  }
  return make_sequence_dataset(std::move(sequences), data_names(t, 2));
}

std::string sequences_to_csv(const SequenceDataset& data) {
  std::string out = "seq_id,step";
  for (const auto& name : data.feature_names) out += "," + name;
  out += "\n";
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    const Matrix& seq = data.sequences[s];
    for (Index t = 0; t < seq.rows(); ++t) {
      out += std::to_string(s) + "," + std::to_string(t);
      for (Index c = 0; c < seq.cols(); ++c) out += "," + format_double(seq(t, c));
      out += "\n";
    }
  }
  return out;
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  const Table t = parse_csv(read_text(path));
  const auto col = std::find(t.header.begin(), t.header.end(), "label");
  if (col == t.header.end()) parse_error("labels CSV needs a 'label' column");
  const Index c = col - t.header.begin();
  std::vector<int> labels;
  for (Index r = 0; r < t.values.rows(); ++r) {
    const double v = t.values(r, c);
    if (v != std::floor(v)) parse_error("label on row " + std::to_string(r + 1) + " is not an integer");
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

std::string labels_to_csv(const std::vector<int>& labels) {
  std::string out = "seq_id,label\n";
  for (std::size_t s = 0; s < labels.size(); ++s) out += std::to_string(s) + "," + std::to_string(labels[s]) + "\n";
  return out;
}

std::map<std::string, Domain> parse_domains(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    parse_error(std::string("domains document: ") + e.what());
  }
  if (!doc.is_object()) parse_error("domains document must be an object");
  std::map<std::string, Domain> out;
  for (const auto& [name, range] : doc.items()) {
    if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
      parse_error("domain of '" + name + "' must be [low, high]");
    out[name] = Domain{range[0].get<double>(), range[1].get<double>()};
  }
  return out;
}

void apply_domains(Dataset& data, const std::map<std::string, Domain>& domains) {
  std::vector<Domain> merged = data.domains;
  for (const auto& [name, d] : domains) merged[static_cast<std::size_t>(data.feature_index(name))] = d;
  data = make_dataset(std::move(data.rows), std::move(data.feature_names), std::move(merged));
}

void apply_domains(SequenceDataset& data, const std::map<std::string, Domain>& domains) {
  for (const auto& [name, d] : domains) {
    if (!(d.low <= d.high)) throw Error(ErrorCode::domain, "domain of '" + name + "' has low > high");
    data.feature_domains[static_cast<std::size_t>(data.feature_index(name))] = d;
  }
}

std::string sweep_to_csv(const InterventionSweep& sweep, const CausalRegressor* reg, Diagnostics* diag) {
  const double base = reg != nullptr ? reg->baseline : sweep_baseline(sweep);
  const std::string method(to_string(sweep.method));
  std::string out = "alpha,interventional_expectation,ace,predictive_variance,method\n";
  for (Index j = 0; j < sweep.grid.alphas.size(); ++j) {
    const double alpha = sweep.grid.alphas(j);
    out += format_double(alpha) + "," + format_double(sweep.ie(j)) + "," + format_double(sweep.ie(j) - base) + ",";
    if (reg != nullptr) out += format_double(predict(*reg, alpha, diag).variance);
    out += "," + method + "\n";
  }
  return out;
}

std::string ace_to_csv(const std::vector<AceResult>& rows, double baseline, Method method) {
  std::string out = "# baseline=" + format_double(baseline) + "\n";
  out += "alpha,interventional_expectation,ace,predictive_variance,method\n";
  for (const auto& r : rows) {
    out += format_double(r.alpha) + "," + format_double(r.ie) + "," + format_double(r.ace) + ",";
    if (r.predictive_variance) out += format_double(*r.predictive_variance);
    out += "," + std::string(to_string(method)) + "\n";
  }
  return out;
}

std::string regressor_to_json(const CausalRegressor& reg) {
  const json doc{{"order", reg.order},
                 {"domain", json::array({reg.domain.low, reg.domain.high})},
                 {"coefficients", vector_json(reg.raw_coefficients())},
                 {"unit_coefficients", vector_json(reg.posterior.mean)},
                 {"unit_covariance", matrix_json(reg.posterior.covariance)},
                 {"target_offset", reg.target_offset},
                 {"target_scale", reg.target_scale},
                 {"prior_precision", reg.posterior.prior_precision},
                 {"noise_precision", reg.posterior.noise_precision},
                 {"log_evidence", reg.posterior.log_evidence},
                 {"baseline", reg.baseline}};
  return doc.dump(2) + "\n";
}

std::string matrix_to_csv(const Matrix& values) {
  std::string out;
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) out += (c ? "," : "") + format_double(values(r, c));
    out += "\n";
  }
  return out;
}

std::string matrix_to_pgm(const Matrix& values) {
  std::ostringstream out;
  out << "P2\n" << values.cols() << " " << values.rows() << "\n255\n";
  const double lo = values.size() ? values.minCoeff() : 0.0;
  const double span = values.size() ? values.maxCoeff() - lo : 0.0;
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) {
      const long level = span > 0.0 ? std::lround(255.0 * (values(r, c) - lo) / span) : 0;
      out << (c ? " " : "") << level;
    }
    out << "\n";
  }
  return out.str();
}

std::string training_log_to_csv(const TrainingLog& log) {
  std::string out = "epoch,loss,accuracy\n";
  for (const auto& rec : log)
    out += std::to_string(rec.epoch) + "," + format_double(rec.loss) + "," + format_double(rec.accuracy) + "\n";
  return out;
}

}  // namespace ace
