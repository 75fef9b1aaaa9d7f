#include <charconv>
#include <fstream>
#include <sstream>

#include "tps/pinn.hpp"

// Text layout:
//
//   # tps-reliab surrogate weights
//   version 1
//   layer_sizes 4 30 30 30 1
//   k_range <min> <max>
//   rho_cp_range <min> <max>
//   T_norm <v>
//   t_final <v>
//   L <v>
//   Q <v>
//   T_init <v>
//   weights <layer> <rows> <cols>      one line per row
//   biases <layer> <n>                 one line
//   ...
//   end
//
// Numbers use the shortest representation that round-trips exactly.

namespace tps::pinn {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_row(std::string& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += fmt(values[i]);
  }
  out += '\n';
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  // Next non-empty, non-comment line split into tokens.
  std::vector<std::string_view> next(const std::string& section) {
    while (pos_ < text_.size()) {
      const auto eol = text_.find('\n', pos_);
      const auto line = text_.substr(pos_, eol == std::string_view::npos ? text_.size() - pos_ : eol - pos_);
      pos_ = eol == std::string_view::npos ? text_.size() : eol + 1;
      auto tokens = split(line);
      if (tokens.empty() || tokens.front().starts_with('#')) continue;
      return tokens;
    }
    throw WeightsFormatError(section, "weights file truncated: missing section '" + section + "'");
  }

 private:
  static std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      const std::size_t start = i;
      while (i < line.size() && !(line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

double parse_double(std::string_view tok, const std::string& section) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw WeightsFormatError(section, "malformed number '" + std::string(tok) + "' in section '" +
                                          section + "'");
  }
  return v;
}

std::size_t parse_size(std::string_view tok, const std::string& section) {
  std::size_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw WeightsFormatError(section, "malformed integer '" + std::string(tok) + "' in section '" +
                                          section + "'");
  }
  return v;
}

std::vector<std::string_view> expect(LineReader& in, const std::string& key, std::size_t n_values,
                                     const std::string& label = {}) {
  const std::string& section = label.empty() ? key : label;
  auto tokens = in.next(section);
  if (tokens.front() != key) {
    throw WeightsFormatError(section, "expected section '" + section + "', found '" +
                                          std::string(tokens.front()) + "'");
  }
  if (n_values != 0 && tokens.size() != n_values + 1) {
    throw WeightsFormatError(section, "section '" + section + "' expects " +
                                          std::to_string(n_values) + " values");
  }
  return tokens;
}

double scalar(LineReader& in, const std::string& key) {
  return parse_double(expect(in, key, 1)[1], key);
}

ParamRange range(LineReader& in, const std::string& key) {
  const auto t = expect(in, key, 2);
  ParamRange r{parse_double(t[1], key), parse_double(t[2], key)};
  if (!(r.min < r.max)) throw WeightsFormatError(key, "section '" + key + "' requires min < max");
  return r;
}

}  // namespace

std::string to_text(const SurrogateModel& model) {
  std::string out = "# tps-reliab surrogate weights\n";
  out += "version " + std::to_string(kWeightsVersion) + "\n";
  out += "layer_sizes";
  for (auto s : model.net.layer_sizes()) out += " " + std::to_string(s);
  out += "\n";
  out += "k_range " + fmt(model.k_range.min) + " " + fmt(model.k_range.max) + "\n";
  out += "rho_cp_range " + fmt(model.rho_cp_range.min) + " " + fmt(model.rho_cp_range.max) + "\n";
  const auto& s = model.scenario;
  out += "T_norm " + fmt(s.t_norm) + "\n";
  out += "t_final " + fmt(s.t_final) + "\n";
  out += "L " + fmt(s.thickness) + "\n";
  out += "Q " + fmt(s.flux) + "\n";
  out += "T_init " + fmt(s.t_init) + "\n";
  const auto& sizes = model.net.layer_sizes();
  for (std::size_t l = 0; l < model.net.n_layers(); ++l) {
    const std::size_t rows = sizes[l + 1], cols = sizes[l];
    out += "weights " + std::to_string(l) + " " + std::to_string(rows) + " " + std::to_string(cols) + "\n";
    const auto w = model.net.weights(l);
    for (std::size_t r = 0; r < rows; ++r) write_row(out, w.subspan(r * cols, cols));
    out += "biases " + std::to_string(l) + " " + std::to_string(rows) + "\n";
    write_row(out, model.net.biases(l));
  }
  out += "end\n";
  return out;
}

SurrogateModel from_text(std::string_view text) {
  LineReader in(text);
  const auto version = expect(in, "version", 1);
  if (parse_size(version[1], "version") != static_cast<std::size_t>(kWeightsVersion)) {
    throw WeightsFormatError("version", "unsupported weights version " + std::string(version[1]) +
                                            " (expected " + std::to_string(kWeightsVersion) + ")");
  }
  const auto size_tokens = expect(in, "layer_sizes", 0);
  std::vector<std::size_t> sizes;
  for (std::size_t i = 1; i < size_tokens.size(); ++i) sizes.push_back(parse_size(size_tokens[i], "layer_sizes"));
  if (sizes.size() < 2 || sizes.front() != 4 || sizes.back() != 1) {
    throw WeightsFormatError("layer_sizes", "layer_sizes must start with 4 inputs and end with 1 output");
  }
  for (auto s : sizes) {
    if (s == 0) throw WeightsFormatError("layer_sizes", "layer_sizes must be positive");
  }

  SurrogateModel model;
  model.k_range = range(in, "k_range");
  model.rho_cp_range = range(in, "rho_cp_range");
  model.scenario.t_norm = scalar(in, "T_norm");
  model.scenario.t_final = scalar(in, "t_final");
  model.scenario.thickness = scalar(in, "L");
  model.scenario.flux = scalar(in, "Q");
  model.scenario.t_init = scalar(in, "T_init");
  try {
    model.scenario.validate();
  } catch (const std::invalid_argument& e) {
    throw WeightsFormatError("T_norm", std::string("invalid normalization constants: ") + e.what());
  }

  model.net = ad::MlpNetwork(sizes);
  for (std::size_t l = 0; l < model.net.n_layers(); ++l) {
    const std::string wkey = "weights " + std::to_string(l);
    const auto head = expect(in, "weights", 3, wkey);
    if (parse_size(head[1], wkey) != l || parse_size(head[2], wkey) != sizes[l + 1] ||
        parse_size(head[3], wkey) != sizes[l]) {
      throw WeightsFormatError(wkey, "dimension mismatch in section '" + wkey + "'");
    }
    auto w = model.net.weights(l);
    for (std::size_t r = 0; r < sizes[l + 1]; ++r) {
      const auto row = in.next(wkey);
      if (row.size() != sizes[l]) {
        throw WeightsFormatError(wkey, "row " + std::to_string(r) + " of '" + wkey + "' has " +
                                           std::to_string(row.size()) + " values, expected " +
                                           std::to_string(sizes[l]));
      }
      for (std::size_t c = 0; c < sizes[l]; ++c) w[r * sizes[l] + c] = parse_double(row[c], wkey);
    }
    const std::string bkey = "biases " + std::to_string(l);
    const auto bhead = expect(in, "biases", 2, bkey);
    if (parse_size(bhead[1], bkey) != l || parse_size(bhead[2], bkey) != sizes[l + 1]) {
      throw WeightsFormatError(bkey, "dimension mismatch in section '" + bkey + "'");
    }
    const auto row = in.next(bkey);
    if (row.size() != sizes[l + 1]) {
      throw WeightsFormatError(bkey, "'" + bkey + "' has " + std::to_string(row.size()) +
                                         " values, expected " + std::to_string(sizes[l + 1]));
    }
    auto b = model.net.biases(l);
    for (std::size_t c = 0; c < sizes[l + 1]; ++c) b[c] = parse_double(row[c], bkey);
  }
  expect(in, "end", 0);
  return model;
}

void save_weights(const SurrogateModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write weights file " + path.string());
  out << to_text(model);
  if (!out) throw std::runtime_error("failed writing weights file " + path.string());
}

SurrogateModel load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read weights file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

}  // namespace tps::pinn
