#include "ddim/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

namespace ddim {

namespace {

constexpr std::array<std::string_view, 8> kClassNames{
    "beam_equal_section",        "beam_v_pier_rigid_frame", "arch_top_bearing",
    "arch_bottom_bearing",       "cable_stayed_harp",       "cable_stayed_fan",
    "suspension_vertical_sling", "suspension_diagonal_sling",
};

// Black-on-white raster where every plotted pixel is also plotted at its
// mirror column, so the result is symmetric regardless of rounding.
class Canvas {
public:
    Canvas(const RenderConfig& config, double metres, int stroke)
        : image_(config.width, config.height, 255),
          w_(static_cast<long>(config.width)),
          h_(static_cast<long>(config.height)),
          ppm_(static_cast<double>(config.width) / metres),
          stroke_(stroke) {}

    long col(double x_m) const { return static_cast<long>(std::floor(x_m * ppm_)); }
    long width() const { return w_; }
    long height() const { return h_; }

    void require(const char* element, long c, long r) const {
        if (c < 0 || c >= w_ || r < 0 || r >= h_) {
            throw RenderError("render: element '" + std::string(element) + "' exits the canvas at column " +
                              std::to_string(c) + ", row " + std::to_string(r));
        }
    }

    void rows(const char* element, long first, long last) {
        require(element, 0, first);
        require(element, 0, last);
        for (long r = first; r <= last; ++r) {
            for (long c = 0; c < w_; ++c) set(c, r);
        }
    }

    // Integer line rasterization between pixel centers, drawn with a square brush.
    void line(const char* element, long c0, long r0, long c1, long r1) {
        require(element, c0, r0);
        require(element, c1, r1);
        const long dc = std::abs(c1 - c0), dr = -std::abs(r1 - r0);
        const long sc = c0 < c1 ? 1 : -1, sr = r0 < r1 ? 1 : -1;
        long err = dc + dr;
        for (;;) {
            brush(c0, r0);
            if (c0 == c1 && r0 == r1) break;
            const long e2 = 2 * err;
            if (e2 >= dr) {
                err += dr;
                c0 += sc;
            }
            if (e2 <= dc) {
                err += dc;
                r0 += sr;
            }
        }
    }

    void line_m(const char* element, double x0, long r0, double x1, long r1) {
        line(element, col(x0), r0, col(x1), r1);
    }

    GrayImage take() { return std::move(image_); }

private:
    void brush(long c, long r) {
        for (long dr = 0; dr < stroke_; ++dr) {
            for (long dc = 0; dc < stroke_; ++dc) {
                const long cc = c - dc, rr = r - dr;
                if (cc >= 0 && cc < w_ && rr >= 0 && rr < h_) set(cc, rr);
            }
        }
    }

    void set(long c, long r) {
        image_.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 0;
        image_.at(static_cast<std::size_t>(r), static_cast<std::size_t>(w_ - 1 - c)) = 0;
    }

    GrayImage image_;
    long w_, h_;
    double ppm_;
    long stroke_;
};

// Parabola through (x0, r_end), (x1, r_end) with vertex (mid, r_apex).
struct Parabola {
    double x0, x1;
    double r_end, r_apex;

    double row(double x) const {
        const double mid = 0.5 * (x0 + x1), half = 0.5 * (x1 - x0);
        const double u = (x - mid) / half;
        return r_apex + (r_end - r_apex) * u * u;
    }
};

long round_row(double r) { return std::lround(r); }

void draw_parabola(Canvas& cv, const char* element, const Parabola& p, double metres) {
    const long c0 = cv.col(p.x0), c1 = cv.col(p.x1);
    const double m_per_px = metres / static_cast<double>(cv.width());
    long pc = c0, pr = round_row(p.r_end);
    for (long c = c0 + 1; c <= c1; ++c) {
        const double x = c == c1 ? p.x1 : (static_cast<double>(c) + 0.5) * m_per_px;
        const long r = round_row(p.row(x));
        cv.line(element, pc, pr, c, r);
        pc = c;
        pr = r;
    }
}

struct Layout {
    long deck;        // top row of the deck bar
    long deck_bottom; // last row of the deck bar
    long ground;      // foot of piers and towers
    long tower_top;   // top of towers, cable anchors and through-arch crowns
    int members;      // per half-span
};

Layout layout_for(const BridgeSpec& spec, const RenderConfig& config) {
    const double h = static_cast<double>(config.height);
    const double hf = spec.jitter.height_factor;
    Layout l{};
    l.deck = static_cast<long>(config.deck_row());
    const double base_thickness = spec.type == BridgeClass::beam_equal_section ? 3.0 : 2.0;
    const long thickness = std::max(1L, std::lround(base_thickness * spec.jitter.deck_factor * h / 48.0));
    l.deck_bottom = l.deck + thickness - 1;
    const double below = h - 1.0 - static_cast<double>(l.deck);
    const double above = static_cast<double>(l.deck);
    l.ground = l.deck + std::lround(0.7 * hf * below);
    l.tower_top = l.deck - std::lround(0.8 * hf * above);
    l.members = kDefaultMembersPerHalfSpan + spec.jitter.member_offset;
    return l;
}

}  // namespace

std::string_view class_name(BridgeClass c) { return kClassNames.at(static_cast<std::size_t>(c)); }

std::optional<BridgeClass> parse_class(std::string_view name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (kClassNames[i] == name) return static_cast<BridgeClass>(i);
    }
    return std::nullopt;
}

bool is_beam(BridgeClass c) {
    return c == BridgeClass::beam_equal_section || c == BridgeClass::beam_v_pier_rigid_frame;
}

SpanTriple spans_for(BridgeClass c) { return is_beam(c) ? SpanTriple{80.0, 140.0} : SpanTriple{67.0, 166.0}; }

void BridgeSpec::validate() const {
    const auto& j = jitter;
    if (!(j.height_factor >= 0.85 && j.height_factor <= 1.15)) {
        throw std::invalid_argument("bridge: height factor " + std::to_string(j.height_factor) +
                                    " outside [0.85, 1.15]");
    }
    if (j.member_offset < -1 || j.member_offset > 1) {
        throw std::invalid_argument("bridge: member offset " + std::to_string(j.member_offset) +
                                    " outside {-1, 0, 1}");
    }
    if (!(j.deck_factor >= 0.8 && j.deck_factor <= 1.2)) {
        throw std::invalid_argument("bridge: deck factor " + std::to_string(j.deck_factor) +
                                    " outside [0.8, 1.2]");
    }
    if (j.stroke_width != 1 && j.stroke_width != 2) {
        throw std::invalid_argument("bridge: stroke width " + std::to_string(j.stroke_width) +
                                    " must be 1 or 2");
    }
}

std::size_t RenderConfig::deck_row() const {
    return static_cast<std::size_t>(std::lround(0.55 * static_cast<double>(height)));
}

void RenderConfig::validate() const {
    if (width == 0 || height == 0 || width % 8 != 0 || height % 8 != 0) {
        throw std::invalid_argument("render config: " + std::to_string(width) + "x" + std::to_string(height) +
                                    " must be positive multiples of 8");
    }
}

GrayImage render(const BridgeSpec& spec, const RenderConfig& config) {
    config.validate();
    if (spec.jitter.stroke_width < 1) throw std::invalid_argument("render: stroke width must be >= 1");
    if (spec.jitter.height_factor <= 0.0 || spec.jitter.deck_factor <= 0.0) {
        throw std::invalid_argument("render: jitter factors must be positive");
    }
    const SpanTriple spans = spec.spans();
    const double total = spans.total();
    const double left = spans.side, right = spans.side + spans.main;
    const double half_main = 0.5 * spans.main;
    const Layout l = layout_for(spec, config);
    Canvas cv(config, total, spec.jitter.stroke_width);

    if (l.members < 1) throw std::invalid_argument("render: member count must be >= 1");
    cv.rows("deck", l.deck, l.deck_bottom);

    const int n = l.members;
    const double spacing = half_main / (n + 1);

    switch (spec.type) {
        case BridgeClass::beam_equal_section:
            cv.line_m("pier", left, l.deck_bottom, left, l.ground);
            break;

        case BridgeClass::beam_v_pier_rigid_frame: {
            const long knee = (l.deck_bottom + l.ground) / 2;
            const double leg = 12.0;
            cv.line_m("v-pier leg", left - leg, l.deck_bottom, left, knee);
            cv.line_m("v-pier leg", left + leg, l.deck_bottom, left, knee);
            cv.line_m("pier", left, knee, left, l.ground);
            break;
        }

        case BridgeClass::arch_top_bearing: {
            cv.line_m("pier", left, l.deck_bottom, left, l.ground);
            const double crown = static_cast<double>(l.ground) -
                                 std::round(spec.jitter.height_factor * 0.8 *
                                            static_cast<double>(l.ground - l.deck_bottom));
            const Parabola rib{left, right, static_cast<double>(l.ground), crown};
            draw_parabola(cv, "arch rib", rib, total);
            for (int k = 1; k <= n; ++k) {
                const double x = left + k * spacing;
                cv.line_m("spandrel column", x, round_row(rib.row(x)), x, l.deck_bottom);
            }
            break;
        }

        case BridgeClass::arch_bottom_bearing: {
            cv.line_m("pier", left, l.deck_bottom, left, l.ground);
            const double crown = static_cast<double>(l.tower_top) + 1.0;
            const Parabola rib{left, right, static_cast<double>(l.deck), crown};
            draw_parabola(cv, "arch rib", rib, total);
            for (int k = 1; k <= n; ++k) {
                const double x = left + k * spacing;
                cv.line_m("hanger", x, round_row(rib.row(x)), x, l.deck);
            }
            break;
        }

        case BridgeClass::cable_stayed_harp: {
            cv.line_m("tower", left, l.ground, left, l.tower_top);
            const double tower = static_cast<double>(l.deck - l.tower_top);
            const double reach = 0.9 * spans.side;
            for (int k = 1; k <= n; ++k) {
                const double rise = tower * (0.3 + 0.7 * k / n);
                const long anchor = l.deck - std::lround(rise);
                const double dx = reach * rise / tower;
                cv.line_m("stay", left, anchor, left - dx, l.deck);
                cv.line_m("stay", left, anchor, left + dx, l.deck);
            }
            break;
        }

        case BridgeClass::cable_stayed_fan: {
            cv.line_m("tower", left, l.ground, left, l.tower_top);
            for (int k = 1; k <= n; ++k) {
                cv.line_m("stay", left, l.tower_top, left - 0.9 * spans.side * k / n, l.deck);
                cv.line_m("stay", left, l.tower_top, left + 0.9 * half_main * k / n, l.deck);
            }
            break;
        }

        case BridgeClass::suspension_vertical_sling:
        case BridgeClass::suspension_diagonal_sling: {
            cv.line_m("tower", left, l.ground, left, l.tower_top);
            const Parabola cable{left, right, static_cast<double>(l.tower_top), static_cast<double>(l.deck - 2)};
            draw_parabola(cv, "main cable", cable, total);
            cv.line_m("back stay", left, l.tower_top, 0.0, l.deck - 1);
            const bool diagonal = spec.type == BridgeClass::suspension_diagonal_sling;
            for (int k = 1; k <= n; ++k) {
                const double x = left + k * spacing;
                const double top = diagonal ? x + (k % 2 == 1 ? 0.5 : -0.5) * spacing : x;
                cv.line_m("sling", top, round_row(cable.row(top)), x, l.deck);
            }
            break;
        }
    }
    return cv.take();
}

Jitter draw_jitter(Rng& rng) {
    Jitter j;
    j.height_factor = rng.uniform(0.85, 1.15);
    j.member_offset = static_cast<int>(rng.uniform_int(-1, 1));
    j.deck_factor = rng.uniform(0.8, 1.2);
    j.stroke_width = static_cast<int>(rng.uniform_int(1, 2));
    return j;
}

std::string manifest_line(const ManifestEntry& e) {
    nlohmann::ordered_json j;
    j["file"] = e.file;
    j["class"] = std::string(class_name(e.type));
    j["seed"] = e.seed;
    j["index"] = e.index;
    j["jitter"] = {
        {"height_factor", e.jitter.height_factor},
        {"member_offset", e.jitter.member_offset},
        {"deck_factor", e.jitter.deck_factor},
        {"stroke_width", e.jitter.stroke_width},
    };
    return j.dump();
}

ManifestEntry parse_manifest_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        ManifestEntry e;
        e.file = j.at("file").get<std::string>();
        const auto name = j.at("class").get<std::string>();
        const auto type = parse_class(name);
        if (!type) throw std::runtime_error("unknown bridge class '" + name + "'");
        e.type = *type;
        e.seed = j.at("seed").get<std::uint64_t>();
        e.index = j.value("index", std::size_t{0});
        const auto& jit = j.at("jitter");
        e.jitter.height_factor = jit.at("height_factor").get<double>();
        e.jitter.member_offset = jit.at("member_offset").get<int>();
        e.jitter.deck_factor = jit.at("deck_factor").get<double>();
        e.jitter.stroke_width = jit.at("stroke_width").get<int>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw std::runtime_error(std::string("manifest: ") + ex.what());
    }
}

std::vector<ManifestEntry> generate_corpus(std::size_t per_class, std::uint64_t seed,
                                           const std::filesystem::path& out_dir, const RenderConfig& config) {
    if (per_class < 1) throw std::invalid_argument("generate_corpus: per_class must be >= 1");
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw std::runtime_error("generate_corpus: cannot create directory " + out_dir.string() +
                                 (ec ? ": " + ec.message() : std::string()));
    }

    std::vector<ManifestEntry> entries;
    entries.reserve(per_class * kBridgeClasses.size());
    for (BridgeClass type : kBridgeClasses) {
        Rng rng(seed, "dataset/" + std::string(class_name(type)));
        for (std::size_t i = 0; i < per_class; ++i) {
            ManifestEntry e;
            e.type = type;
            e.seed = seed;
            e.index = i;
            e.jitter = draw_jitter(rng);
            e.file = std::string(class_name(type)) + "_" + std::to_string(i) + ".pgm";
            BridgeSpec spec{type, e.jitter, seed};
            spec.validate();
            write_pgm(render(spec, config), out_dir / e.file);
            entries.push_back(std::move(e));
        }
    }

    const auto manifest = out_dir / "manifest.jsonl";
    std::ofstream out(manifest, std::ios::binary);
    if (!out) throw std::runtime_error("generate_corpus: cannot write " + manifest.string());
    for (const auto& e : entries) out << manifest_line(e) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("generate_corpus: write failed for " + manifest.string());
    return entries;
}

Tensor<float> image_to_tensor(const GrayImage& image) {
    Tensor<float> t(Shape{image.height, image.width, 1});
    for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = static_cast<float>(image.pixels[i]) / 255.0f;
    return t;
}

std::vector<Tensor<float>> load_corpus(const std::filesystem::path& dir, std::vector<ManifestEntry>* entries) {
    const auto manifest = dir / "manifest.jsonl";
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error("load_corpus: cannot open " + manifest.string());
    std::vector<Tensor<float>> images;
    std::vector<ManifestEntry> parsed;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ManifestEntry e;
        try {
            e = parse_manifest_line(line);
        } catch (const std::exception& ex) {
            throw std::runtime_error(manifest.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
        const auto path = dir / e.file;
        if (!std::filesystem::exists(path)) {
            throw std::runtime_error("load_corpus: manifest lists missing file " + path.string());
        }
        auto img = image_to_tensor(read_pgm(path));
        if (!images.empty() && img.shape() != images.front().shape()) {
            throw ShapeError("load_corpus: " + path.string() + " is " + shape_str(img.shape()) + ", expected " +
                             shape_str(images.front().shape()));
        }
        images.push_back(std::move(img));
        parsed.push_back(std::move(e));
    }
    if (images.empty()) throw std::runtime_error("load_corpus: manifest " + manifest.string() + " lists no images");
    if (entries) *entries = std::move(parsed);
    return images;
}

}  // namespace ddim
