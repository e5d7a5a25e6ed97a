#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covact/evaluation.hpp"
#include "covact/recognizer.hpp"
#include "covact/skeleton.hpp"

namespace covact {

/// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double value);
/// Strict parse of a whole token; "nan" and "inf" are accepted.
double parse_double(std::string_view token);
long long parse_integer(std::string_view token);

/// Skeleton stream file:
///
///   covact-stream 1 K <K> hip_center <i> shoulder_center <i> spine <i> joints <name>...
///   <frame> <x0> <y0> <z0> ... <x(K-1)> <y(K-1)> <z(K-1)>
///
/// Missing joints are written as nan. Blank lines and lines starting with
/// '#' are ignored.
struct StreamData {
  JointLayout layout;
  std::vector<SkeletonFrame> frames;
};

void write_stream(std::ostream& out, const JointLayout& layout,
                  std::span<const SkeletonFrame> frames);
StreamData read_stream(std::istream& in, const std::string& source);
void save_stream(const std::filesystem::path& path, const JointLayout& layout,
                 std::span<const SkeletonFrame> frames);
StreamData load_stream(const std::filesystem::path& path);

/// Versioned text model. Floats use format_double so a save/load cycle
/// reproduces every value bit for bit.
void write_model(std::ostream& out, const TrainedModel& model);
TrainedModel read_model(std::istream& in, const std::string& source);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

/// Training manifest: one `<label> <stream path>` per line, relative paths
/// resolved against the manifest directory. Labels must be positive.
struct TrainingEntry {
  int label = 0;
  std::filesystem::path stream;
};
std::vector<TrainingEntry> load_training_manifest(const std::filesystem::path& path);

/// Evaluation manifest: one `<stream path> <annotation path>` per line.
struct EvaluationEntry {
  std::filesystem::path stream;
  std::filesystem::path annotation;
};
std::vector<EvaluationEntry> load_evaluation_manifest(const std::filesystem::path& path);

/// Annotation file: one `<start> <end> <label>` per segment, end exclusive.
void write_annotation(std::ostream& out, const StreamAnnotation& annotation);
StreamAnnotation read_annotation(std::istream& in, const std::string& source);
void save_annotation(const std::filesystem::path& path, const StreamAnnotation& annotation);
StreamAnnotation load_annotation(const std::filesystem::path& path);

/// Per-frame recognition output. Frames without an event are written with
/// kind `pending` (before the first decision) or `dropped` (missing joints).
struct FrameRecord {
  std::size_t frame_index = 0;
  int label = 0;
  std::string kind;
  double min_distance = 0.0;
  double std_dev = 0.0;
  std::vector<double> distances;
};

void write_events(std::ostream& out, std::span<const FrameRecord> records);
std::vector<FrameRecord> read_events(std::istream& in, const std::string& source);
/// One line per frame: the frame index followed by the distance to every
/// class, in model class order.
void write_trace(std::ostream& out, std::span<const FrameRecord> records,
                 std::span<const int> labels);

/// Events carried by the records, in order.
std::vector<RecognitionEvent> events_of(std::span<const FrameRecord> records);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling so readers never see a partial file.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace covact
