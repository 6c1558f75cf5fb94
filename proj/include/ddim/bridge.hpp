#pragma once

// Procedural three-span bridge facades: eight sub-types, black line art on
// white, exactly mirror-symmetric about the vertical centerline.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ddim/pgm.hpp"
#include "ddim/rng.hpp"
#include "ddim/tensor.hpp"

namespace ddim {

enum class BridgeClass {
    beam_equal_section,
    beam_v_pier_rigid_frame,
    arch_top_bearing,
    arch_bottom_bearing,
    cable_stayed_harp,
    cable_stayed_fan,
    suspension_vertical_sling,
    suspension_diagonal_sling,
};

inline constexpr std::array<BridgeClass, 8> kBridgeClasses{
    BridgeClass::beam_equal_section,        BridgeClass::beam_v_pier_rigid_frame,
    BridgeClass::arch_top_bearing,          BridgeClass::arch_bottom_bearing,
    BridgeClass::cable_stayed_harp,         BridgeClass::cable_stayed_fan,
    BridgeClass::suspension_vertical_sling, BridgeClass::suspension_diagonal_sling,
};

std::string_view class_name(BridgeClass c);
std::optional<BridgeClass> parse_class(std::string_view name);
bool is_beam(BridgeClass c);

struct SpanTriple {
    double side, main;  // metres; total = 2 * side + main
    double total() const { return 2 * side + main; }
};

// 80+140+80 m for beam bridges, 67+166+67 m for the others.
SpanTriple spans_for(BridgeClass c);

struct Jitter {
    double height_factor = 1.0;  // vertical elements, [0.85, 1.15]
    int member_offset = 0;       // slings/stays/columns per half-span, {-1, 0, +1}
    double deck_factor = 1.0;    // deck thickness, [0.8, 1.2]
    int stroke_width = 1;        // {1, 2} px

    bool operator==(const Jitter&) const = default;
};

struct BridgeSpec {
    BridgeClass type = BridgeClass::beam_equal_section;
    Jitter jitter;
    std::uint64_t seed = 0;

    SpanTriple spans() const { return spans_for(type); }
    // Throws std::invalid_argument when a jitter value is outside its range.
    void validate() const;
};

inline constexpr int kDefaultMembersPerHalfSpan = 8;

struct RenderConfig {
    std::size_t width = 192;
    std::size_t height = 48;

    double pixels_per_metre(double total_span = 300.0) const { return static_cast<double>(width) / total_span; }
    // Top row of the deck bar; identical for every class.
    std::size_t deck_row() const;
    void validate() const;
};

// Thrown when an element's centerline leaves the canvas.
class RenderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

GrayImage render(const BridgeSpec& spec, const RenderConfig& config = {});

// Draws one jitter vector: height factor, member offset, deck factor, stroke width.
Jitter draw_jitter(Rng& rng);

struct ManifestEntry {
    std::string file;
    BridgeClass type;
    std::uint64_t seed;
    std::size_t index;
    Jitter jitter;
};

std::string manifest_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(const std::string& line);

// Writes per_class images of every class plus manifest.jsonl into out_dir.
std::vector<ManifestEntry> generate_corpus(std::size_t per_class, std::uint64_t seed,
                                           const std::filesystem::path& out_dir, const RenderConfig& config = {});

// Loads every manifest image in manifest order as [H,W,1] tensors in [0,1].
std::vector<Tensor<float>> load_corpus(const std::filesystem::path& dir,
                                       std::vector<ManifestEntry>* entries = nullptr);

Tensor<float> image_to_tensor(const GrayImage& image);

}  // namespace ddim
