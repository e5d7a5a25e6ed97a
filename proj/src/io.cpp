#include "covact/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "covact/error.hpp"

namespace covact {

namespace fs = std::filesystem;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_double(std::string_view token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw data_error("malformed number '" + std::string(token) + "'");
  }
  return value;
}

long long parse_integer(std::string_view token) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
    throw data_error("malformed integer '" + std::string(token) + "'");
  }
  return value;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

/// Reads the next line holding at least one token, skipping comments.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next() {
    while (std::getline(in_, line_)) {
      ++number_;
      tokens_ = split(line_);
      if (!tokens_.empty() && tokens_.front().front() != '#') return true;
    }
    tokens_.clear();
    return false;
  }

  const std::vector<std::string_view>& tokens() const { return tokens_; }

  Error fail(const std::string& what) const {
    return data_error(source_ + ":" + std::to_string(number_) + ": " + what);
  }

  /// Current line must read `<key> <values>...` with exactly `count` values.
  std::vector<std::string_view> expect(std::string_view key, std::size_t count) {
    if (!next()) throw fail("truncated file, expected '" + std::string(key) + "'");
    if (tokens_.front() != key) throw fail("expected '" + std::string(key) + "'");
    if (tokens_.size() != count + 1) throw fail("wrong field count for '" + std::string(key) + "'");
    return {tokens_.begin() + 1, tokens_.end()};
  }

  double number(std::string_view token) const {
    try {
      return parse_double(token);
    } catch (const Error& e) {
      throw fail(e.what());
    }
  }

  long long integer(std::string_view token) const {
    try {
      return parse_integer(token);
    } catch (const Error& e) {
      throw fail(e.what());
    }
  }

  std::size_t count(std::string_view token) const {
    const long long v = integer(token);
    if (v < 0) throw fail("negative count");
    return static_cast<std::size_t>(v);
  }

 private:
  std::istream& in_;
  std::string source_;
  std::string line_;
  std::vector<std::string_view> tokens_;
  std::size_t number_ = 0;
};

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read '" + path.string() + "'");
  return in;
}

fs::path resolve(const fs::path& base, std::string_view token) {
  fs::path p{std::string(token)};
  return p.is_absolute() ? p : base / p;
}

void write_layout_fields(std::ostream& out, const JointLayout& layout) {
  out << "K " << layout.joint_count() << " hip_center " << layout.hip_center
      << " shoulder_center " << layout.shoulder_center << " spine " << layout.spine << " joints";
  for (const auto& name : layout.names) out << ' ' << name;
}

JointLayout parse_layout_fields(const LineReader& reader,
                                std::span<const std::string_view> fields) {
  if (fields.size() < 9 || fields[0] != "K" || fields[2] != "hip_center" ||
      fields[4] != "shoulder_center" || fields[6] != "spine" || fields[8] != "joints") {
    throw reader.fail("malformed joint layout");
  }
  const std::size_t k = reader.count(fields[1]);
  JointLayout layout;
  layout.hip_center = reader.count(fields[3]);
  layout.shoulder_center = reader.count(fields[5]);
  layout.spine = reader.count(fields[7]);
  if (fields.size() != 9 + k) throw reader.fail("joint names do not match K");
  for (std::size_t j = 0; j < k; ++j) layout.names.emplace_back(fields[9 + j]);
  try {
    layout.validate();
  } catch (const Error& e) {
    throw reader.fail(e.what());
  }
  return layout;
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw data_error("cannot write '" + path.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw data_error("cannot write '" + path.string() + "': " + ec.message());
}

void write_stream(std::ostream& out, const JointLayout& layout,
                  std::span<const SkeletonFrame> frames) {
  out << "covact-stream 1 ";
  write_layout_fields(out, layout);
  out << '\n';
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& joints = frames[i].joints;
    if (static_cast<std::size_t>(joints.cols()) != layout.joint_count()) {
      throw data_error("frame " + std::to_string(i) + " does not match the joint layout");
    }
    out << i;
    for (Eigen::Index j = 0; j < joints.cols(); ++j) {
      for (int c = 0; c < 3; ++c) out << ' ' << format_double(joints(c, j));
    }
    out << '\n';
  }
}

StreamData read_stream(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  if (!reader.next()) throw reader.fail("empty stream file");
  const auto& head = reader.tokens();
  if (head.size() < 2 || head[0] != "covact-stream") throw reader.fail("not a stream file");
  if (head[1] != "1") throw reader.fail("unsupported stream version");
  StreamData data;
  data.layout = parse_layout_fields(reader, std::span(head).subspan(2));

  const std::size_t k = data.layout.joint_count();
  long long previous = -1;
  while (reader.next()) {
    const auto& t = reader.tokens();
    if (t.size() != 3 * k + 1) throw reader.fail("truncated stream: expected 3K+1 fields");
    const long long index = reader.integer(t[0]);
    if (index <= previous) throw reader.fail("frame indices must increase");
    previous = index;
    SkeletonFrame frame;
    frame.joints.resize(3, static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t c = 0; c < 3; ++c) {
        frame.joints(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) =
            reader.number(t[1 + 3 * j + c]);
      }
    }
    data.frames.push_back(std::move(frame));
  }
  return data;
}

void save_stream(const fs::path& path, const JointLayout& layout,
                 std::span<const SkeletonFrame> frames) {
  std::ostringstream out;
  write_stream(out, layout, frames);
  write_text_file(path, out.str());
}

StreamData load_stream(const fs::path& path) {
  std::ifstream in = open_input(path);
  return read_stream(in, path.string());
}

void write_model(std::ostream& out, const TrainedModel& model) {
  const RecognizerConfig& c = model.config;
  out << "covact-model 1\n";
  out << "decay " << format_double(c.decay) << '\n';
  out << "init_frames " << c.init_frames << '\n';
  out << "target_dim " << c.target_dim << '\n';
  out << "std_window " << c.std_window << '\n';
  out << "epsilon " << format_double(c.epsilon) << '\n';
  out << "reset_on_boundary " << (c.reset_on_boundary ? 1 : 0) << '\n';
  out << "frame_weighting " << (c.frame_weighting ? 1 : 0) << '\n';
  out << "layout ";
  write_layout_fields(out, model.layout);
  out << '\n';

  out << "neutral " << model.neutral.features.size();
  for (double v : model.neutral.features) out << ' ' << format_double(v);
  out << '\n';

  const Eigen::MatrixXd& p = model.projection.matrix();
  out << "projection " << p.rows() << ' ' << p.cols() << '\n';
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) out << (j ? " " : "") << format_double(p(i, j));
    out << '\n';
  }

  out << "classes " << model.classes.size() << '\n';
  for (const auto& action : model.classes) {
    out << "class " << action.label << ' ' << action.descriptors.size() << '\n';
    for (const auto& d : action.descriptors) {
      const Eigen::MatrixXd& m = d.matrix();
      bool first = true;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = i; j < m.cols(); ++j) {
          out << (first ? "" : " ") << format_double(m(i, j));
          first = false;
        }
      }
      out << '\n';
    }
  }
  out << "end\n";
}

TrainedModel read_model(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  if (!r.next() || r.tokens().size() != 2 || r.tokens()[0] != "covact-model") {
    throw r.fail("not a model file");
  }
  if (r.tokens()[1] != "1") throw r.fail("unsupported model version");

  TrainedModel model;
  RecognizerConfig& c = model.config;
  c.decay = r.number(r.expect("decay", 1)[0]);
  c.init_frames = r.count(r.expect("init_frames", 1)[0]);
  c.target_dim = r.count(r.expect("target_dim", 1)[0]);
  c.std_window = r.count(r.expect("std_window", 1)[0]);
  c.epsilon = r.number(r.expect("epsilon", 1)[0]);
  c.reset_on_boundary = r.integer(r.expect("reset_on_boundary", 1)[0]) != 0;
  c.frame_weighting = r.integer(r.expect("frame_weighting", 1)[0]) != 0;
  try {
    c.validate();
  } catch (const Error& e) {
    throw r.fail(e.what());
  }

  if (!r.next() || r.tokens()[0] != "layout") throw r.fail("expected 'layout'");
  model.layout = parse_layout_fields(r, std::span(r.tokens()).subspan(1));

  if (!r.next() || r.tokens()[0] != "neutral" || r.tokens().size() < 2) {
    throw r.fail("expected 'neutral'");
  }
  {
    const auto& t = r.tokens();
    const std::size_t n = r.count(t[1]);
    if (n != model.layout.feature_dim() || t.size() != n + 2) {
      throw r.fail("neutral pose does not match the joint layout");
    }
    model.neutral.features.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      model.neutral.features(static_cast<Eigen::Index>(i)) = r.number(t[2 + i]);
    }
  }

  const auto shape = r.expect("projection", 2);
  const std::size_t rows = r.count(shape[0]);
  const std::size_t cols = r.count(shape[1]);
  if (rows != model.layout.feature_dim() || cols != c.target_dim) {
    throw r.fail("projection shape does not match the layout and target dimension");
  }
  Eigen::MatrixXd p(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!r.next() || r.tokens().size() != cols) throw r.fail("truncated projection");
    for (std::size_t j = 0; j < cols; ++j) {
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.number(r.tokens()[j]);
    }
  }
  try {
    model.projection = ProjectionMatrix(std::move(p));
  } catch (const Error& e) {
    throw r.fail(e.what());
  }

  const std::size_t class_count = r.count(r.expect("classes", 1)[0]);
  const std::size_t packed = cols * (cols + 1) / 2;
  for (std::size_t l = 0; l < class_count; ++l) {
    const auto head = r.expect("class", 2);
    ActionModel action;
    action.label = static_cast<int>(r.integer(head[0]));
    if (!model.classes.empty() && action.label <= model.classes.back().label) {
      throw r.fail("class labels must increase");
    }
    const std::size_t n = r.count(head[1]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!r.next() || r.tokens().size() != packed) throw r.fail("truncated descriptor");
      Eigen::MatrixXd m(cols, cols);
      std::size_t slot = 0;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = i; j < m.cols(); ++j) {
          m(i, j) = m(j, i) = r.number(r.tokens()[slot++]);
        }
      }
      try {
        action.descriptors.emplace_back(std::move(m));
      } catch (const Error& e) {
        throw r.fail(e.what());
      }
    }
    model.classes.push_back(std::move(action));
  }
  if (!r.next() || r.tokens().size() != 1 || r.tokens()[0] != "end") {
    throw r.fail("missing 'end'");
  }
  if (model.classes.empty()) throw r.fail("model has no classes");
  return model;
}

void save_model(const fs::path& path, const TrainedModel& model) {
  std::ostringstream out;
  write_model(out, model);
  write_text_file(path, out.str());
}

TrainedModel load_model(const fs::path& path) {
  std::ifstream in = open_input(path);
  return read_model(in, path.string());
}

std::vector<TrainingEntry> load_training_manifest(const fs::path& path) {
  std::ifstream in = open_input(path);
  LineReader r(in, path.string());
  const fs::path base = path.parent_path();
  std::vector<TrainingEntry> entries;
  while (r.next()) {
    const auto& t = r.tokens();
    if (t.size() != 2) throw r.fail("expected '<label> <stream>'");
    const long long label = r.integer(t[0]);
    if (label <= 0 || label > std::numeric_limits<int>::max()) {
      throw r.fail("labels must be positive integers");
    }
    entries.push_back({static_cast<int>(label), resolve(base, t[1])});
  }
  return entries;
}

std::vector<EvaluationEntry> load_evaluation_manifest(const fs::path& path) {
  std::ifstream in = open_input(path);
  LineReader r(in, path.string());
  const fs::path base = path.parent_path();
  std::vector<EvaluationEntry> entries;
  while (r.next()) {
    const auto& t = r.tokens();
    if (t.size() != 2) throw r.fail("expected '<stream> <annotation>'");
    entries.push_back({resolve(base, t[0]), resolve(base, t[1])});
  }
  return entries;
}

void write_annotation(std::ostream& out, const StreamAnnotation& annotation) {
  for (const auto& s : annotation.segments) {
    out << s.start << ' ' << s.end << ' ' << s.label << '\n';
  }
}

StreamAnnotation read_annotation(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  StreamAnnotation annotation;
  while (r.next()) {
    const auto& t = r.tokens();
    if (t.size() != 3) throw r.fail("expected '<start> <end> <label>'");
    annotation.segments.push_back(
        {r.count(t[0]), r.count(t[1]), static_cast<int>(r.integer(t[2]))});
  }
  try {
    annotation.validate();
  } catch (const Error& e) {
    throw data_error(source + ": " + e.what());
  }
  return annotation;
}

void save_annotation(const fs::path& path, const StreamAnnotation& annotation) {
  std::ostringstream out;
  write_annotation(out, annotation);
  write_text_file(path, out.str());
}

StreamAnnotation load_annotation(const fs::path& path) {
  std::ifstream in = open_input(path);
  return read_annotation(in, path.string());
}

void write_events(std::ostream& out, std::span<const FrameRecord> records) {
  out << "# frame label kind min_distance std\n";
  for (const auto& rec : records) {
    out << rec.frame_index << ' ' << rec.label << ' ' << rec.kind << ' '
        << format_double(rec.min_distance) << ' ' << format_double(rec.std_dev) << '\n';
  }
}

std::vector<FrameRecord> read_events(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  std::vector<FrameRecord> records;
  while (r.next()) {
    const auto& t = r.tokens();
    if (t.size() != 5) throw r.fail("expected 5 fields");
    FrameRecord rec;
    rec.frame_index = r.count(t[0]);
    rec.label = static_cast<int>(r.integer(t[1]));
    rec.kind = std::string(t[2]);
    rec.min_distance = r.number(t[3]);
    rec.std_dev = r.number(t[4]);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_trace(std::ostream& out, std::span<const FrameRecord> records,
                 std::span<const int> labels) {
  out << "# frame";
  for (int label : labels) out << " d_" << label;
  out << '\n';
  for (const auto& rec : records) {
    out << rec.frame_index;
    for (std::size_t l = 0; l < labels.size(); ++l) {
      out << ' '
          << format_double(l < rec.distances.size() ? rec.distances[l]
                                                    : std::numeric_limits<double>::quiet_NaN());
    }
    out << '\n';
  }
}

std::vector<RecognitionEvent> events_of(std::span<const FrameRecord> records) {
  std::vector<RecognitionEvent> events;
  for (const auto& rec : records) {
    if (rec.kind == "pending" || rec.kind == "dropped") continue;
    events.push_back({rec.frame_index, rec.label, event_kind_from_string(rec.kind),
                      rec.min_distance, rec.std_dev, rec.distances});
  }
  return events;
}

}  // namespace covact
