#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rinktrack/graph_mpn.hpp"
#include "rinktrack/metrics.hpp"
#include "rinktrack/sequence.hpp"

namespace rinktrack {

namespace fs = std::filesystem;

inline constexpr char kEmbeddingMagic[4] = {'R', 'T', 'E', 'B'};
inline constexpr char kModelMagic[4] = {'R', 'T', 'W', 'T'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::uint32_t kModelVersion = 1;

using EmbeddingTable = std::vector<std::vector<float>>;

// --- embeddings.bin --------------------------------------------------------

std::string encode_embeddings(const EmbeddingTable& rows);
/// Throws FormatError on bad magic, version, dimension or length.
EmbeddingTable decode_embeddings(std::string_view bytes);
void write_embeddings(const fs::path& path, const EmbeddingTable& rows);
EmbeddingTable read_embeddings(const fs::path& path);

// --- seq.ini ---------------------------------------------------------------

std::string format_seq_ini(const SequenceInfo& info);
SequenceInfo parse_seq_ini_text(std::string_view text);

// --- homography.csv --------------------------------------------------------

struct HomographyRow {
  int frame_id = 0;
  HomographyMatrix h;
};
std::string format_homographies(std::span<const HomographyRow> rows);
std::vector<HomographyRow> parse_homographies_text(std::string_view text);

// --- det.csv / gt.csv / tracks ---------------------------------------------

/// One MOT-style line: frame,id,bb_left,bb_top,bb_width,bb_height,conf,-1,-1,-1
std::string format_tracks(const TrackOutput& t);
/// Throws FormatError naming the offending line.
TrackOutput parse_tracks_text(std::string_view text);
void write_tracks(const fs::path& path, const TrackOutput& t);
TrackOutput parse_tracks(const fs::path& path);

// --- sequence layout -------------------------------------------------------

/// Writes seq.ini, det.csv, homography.csv and embeddings.bin. When raw is
/// given it supplies the stored float rows ([frame][detection]); otherwise
/// the in-memory embeddings are narrowed to float.
void write_sequence(const fs::path& dir, const Sequence& seq,
                    const std::vector<EmbeddingTable>* raw = nullptr);
Sequence parse_sequence(const fs::path& dir);

// --- model weights ---------------------------------------------------------

struct ModelMeta {
  std::optional<int> epoch;
  std::optional<double> val_idf1;
};

struct LoadedModel {
  ModelParameters params;
  ModelMeta meta;
};

std::string encode_model(const ModelParameters& m, const ModelMeta& meta = {});
/// Throws CorruptModelFile on bad magic, version, truncation, unknown tensor
/// names, missing tensors or wrong shapes.
LoadedModel decode_model(std::string_view bytes);
void save_model(const fs::path& path, const ModelParameters& m,
                const ModelMeta& meta = {});
LoadedModel load_model(const fs::path& path);

// --- metrics ---------------------------------------------------------------

std::string metrics_json(const MetricsReport& r);

// --- helpers ---------------------------------------------------------------

std::string read_file(const fs::path& path);
/// Throws IoError when the file cannot be written.
void write_file(const fs::path& path, std::string_view contents);
/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace rinktrack
