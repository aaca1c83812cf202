#pragma once

// The caption wire format: a bit-exact serializer and a tolerant parser for
// the two caption schemas ("Found a road" / "No roads found" presence form,
// and the counted coordinate form "Found N road(s). Image coordinates are as
// follows: [[(x, y), ...], ...]"). This string format is the contract every
// dataset file and every model prediction speaks.

#include <cctype>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "roadnet/geo.hpp"

namespace roadnet {

enum class CaptionKind { NoRoads, PresenceFound, Roads };

struct Caption {
    CaptionKind kind = CaptionKind::NoRoads;
    std::vector<PixelPolyline> roads;  // non-empty iff kind == Roads

    bool operator==(const Caption&) const = default;

    static Caption no_roads() { return Caption{CaptionKind::NoRoads, {}}; }
    static Caption presence_found() { return Caption{CaptionKind::PresenceFound, {}}; }
    static Caption with_roads(std::vector<PixelPolyline> rs) {
        if (rs.empty()) throw std::invalid_argument("Roads caption needs at least one road");
        return Caption{CaptionKind::Roads, std::move(rs)};
    }
};

// NoRoads -> 0; Roads -> list length; PresenceFound carries no count.
inline std::optional<int> roads_count(const Caption& c) {
    switch (c.kind) {
        case CaptionKind::NoRoads: return 0;
        case CaptionKind::Roads: return static_cast<int>(c.roads.size());
        case CaptionKind::PresenceFound: return std::nullopt;
    }
    return std::nullopt;
}

inline std::string serialize_caption(const Caption& c) {
    switch (c.kind) {
        case CaptionKind::NoRoads: return "No roads found";
        case CaptionKind::PresenceFound: return "Found a road";
        case CaptionKind::Roads: break;
    }
    std::ostringstream os;
    const std::size_t n = c.roads.size();
    os << "Found " << n << (n == 1 ? " road" : " roads") << ". Image coordinates are as follows: [";
    for (std::size_t i = 0; i < n; ++i) {
        if (i) os << ", ";
        os << '[';
        const auto& vs = c.roads[i].vertices;
        for (std::size_t j = 0; j < vs.size(); ++j) {
            if (j) os << ", ";
            os << '(' << vs[j].px << ", " << vs[j].py << ')';
        }
        os << ']';
    }
    os << ']';
    return os.str();
}

struct CaptionError : std::runtime_error {
    enum class Kind { Malformed, CountMismatch, CoordinateOutOfRange };

    Kind kind;
    std::size_t offset = 0;          // byte offset of the failure
    long long declared = 0;          // CountMismatch
    long long actual = 0;            // CountMismatch
    long long value = 0;             // CoordinateOutOfRange

    static CaptionError malformed(const std::string& reason, std::size_t off) {
        CaptionError e("malformed caption at byte " + std::to_string(off) + ": " + reason, Kind::Malformed);
        e.offset = off;
        return e;
    }
    static CaptionError count_mismatch(long long decl, long long act, std::size_t off) {
        CaptionError e("declared " + std::to_string(decl) + " road(s) but found " +
                           std::to_string(act),
                       Kind::CountMismatch);
        e.offset = off;
        e.declared = decl;
        e.actual = act;
        return e;
    }
    static CaptionError out_of_range(long long v, std::size_t off) {
        CaptionError e("coordinate " + std::to_string(v) + " outside [0, 1279]",
                       Kind::CoordinateOutOfRange);
        e.offset = off;
        e.value = v;
        return e;
    }

private:
    CaptionError(const std::string& msg, Kind k) : std::runtime_error(msg), kind(k) {}
};

enum class ParseStrictness { Strict, Lenient };

namespace detail {

class CaptionParser {
public:
    CaptionParser(std::string_view s, ParseStrictness mode) : s_(s), lenient_(mode == ParseStrictness::Lenient) {}

    Caption parse() {
        skip_ws();
        if (try_word("No")) {
            expect_word("roads");
            expect_word("found");
            finish();
            return Caption::no_roads();
        }
        expect_word("Found");
        skip_ws();
        if (pos_ < s_.size() && !std::isdigit(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != '-') {
            expect_word("a");
            expect_word("road");
            finish();
            return Caption::presence_found();
        }
        const std::size_t count_off = pos_;
        const long long declared = parse_integer("road count");
        if (declared <= 0)
            throw CaptionError::malformed("road count must be >= 1 (zero is spelled \"No roads found\")",
                                          count_off);
        if (!try_word("roads")) {
            if (!try_word("road"))
                throw CaptionError::malformed("expected \"road\" or \"roads\"", pos_);
            if (declared != 1 && !lenient_)
                throw CaptionError::malformed("plural \"roads\" required for count > 1", pos_);
        } else if (declared == 1 && !lenient_) {
            throw CaptionError::malformed("singular \"road\" required for count 1", pos_);
        }
        expect_char('.');
        expect_word("Image");
        expect_word("coordinates");
        expect_word("are");
        expect_word("as");
        expect_word("follows");
        expect_char(':');
        skip_ws();
        expect_char('[');
        std::vector<PixelPolyline> roads;
        skip_ws();
        if (peek() == ']') {
            ++pos_;
        } else {
            for (;;) {
                roads.push_back(parse_road());
                skip_ws();
                const char c = peek();
                if (c == ',') {
                    ++pos_;
                    skip_ws();
                    continue;
                }
                if (c == ']') {
                    ++pos_;
                    break;
                }
                throw CaptionError::malformed("expected ',' or ']' in road list", pos_);
            }
        }
        finish();
        if (static_cast<long long>(roads.size()) != declared)
            throw CaptionError::count_mismatch(declared, static_cast<long long>(roads.size()), pos_);
        return Caption::with_roads(std::move(roads));
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    bool lenient_;

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    static bool word_eq(std::string_view a, std::string_view b, bool fold) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            char x = a[i], y = b[i];
            if (fold) {
                x = static_cast<char>(std::tolower(static_cast<unsigned char>(x)));
                y = static_cast<char>(std::tolower(static_cast<unsigned char>(y)));
            }
            if (x != y) return false;
        }
        return true;
    }

    // A word is a maximal run of letters.
    bool try_word(std::string_view w) {
        skip_ws();
        std::size_t end = pos_;
        while (end < s_.size() && std::isalpha(static_cast<unsigned char>(s_[end]))) ++end;
        if (end == pos_) return false;
        if (!word_eq(s_.substr(pos_, end - pos_), w, lenient_)) return false;
        pos_ = end;
        return true;
    }

    void expect_word(std::string_view w) {
        skip_ws();
        if (!try_word(w))
            throw CaptionError::malformed("expected \"" + std::string(w) + "\"", pos_);
    }

    void expect_char(char c) {
        skip_ws();
        if (peek() != c)
            throw CaptionError::malformed(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }

    long long parse_integer(const char* what) {
        skip_ws();
        const std::size_t start = pos_;
        bool neg = false;
        if (peek() == '-') {
            neg = true;
            ++pos_;
        }
        if (!std::isdigit(static_cast<unsigned char>(peek())))
            throw CaptionError::malformed(std::string("expected ") + what, start);
        long long v = 0;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
            if (v < 1000000000) v = v * 10 + (s_[pos_] - '0');
            ++pos_;
        }
        return neg ? -v : v;
    }

    PixelPoint parse_tuple() {
        expect_char('(');
        const std::size_t xo = pos_;
        const long long x = parse_integer("x coordinate");
        expect_char(',');
        const std::size_t yo = pos_;
        const long long y = parse_integer("y coordinate");
        expect_char(')');
        if (x < 0 || x >= kTileSizePx) throw CaptionError::out_of_range(x, xo);
        if (y < 0 || y >= kTileSizePx) throw CaptionError::out_of_range(y, yo);
        return PixelPoint{static_cast<int>(x), static_cast<int>(y)};
    }

    PixelPolyline parse_road() {
        const std::size_t road_off = pos_;
        expect_char('[');
        PixelPolyline road;
        skip_ws();
        if (peek() == ']')
            throw CaptionError::malformed("empty coordinate list", pos_);
        for (;;) {
            const std::size_t pt_off = pos_;
            skip_ws();
            const PixelPoint p = parse_tuple();
            if (!road.vertices.empty() && road.vertices.back() == p) {
                if (!lenient_)
                    throw CaptionError::malformed("consecutive duplicate point", pt_off);
                // lenient: collapse silently
            } else {
                road.vertices.push_back(p);
            }
            skip_ws();
            const char c = peek();
            if (c == ',') {
                ++pos_;
                continue;
            }
            if (c == ']') {
                ++pos_;
                break;
            }
            throw CaptionError::malformed("expected ',' or ']' in coordinate list", pos_);
        }
        if (road.vertices.size() < 2)
            throw CaptionError::malformed("a road needs at least 2 distinct points", road_off);
        return road;
    }

    // Optional trailing period, then end of input.
    void finish() {
        skip_ws();
        if (peek() == '.') {
            ++pos_;
            skip_ws();
        }
        if (lenient_) {
            while (pos_ < s_.size() &&
                   (std::isspace(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
                ++pos_;
        }
        if (pos_ != s_.size())
            throw CaptionError::malformed("unexpected trailing text", pos_);
    }
};

}  // namespace detail

// Total over all inputs: returns a Caption or throws CaptionError; never
// anything else. Tolerates whitespace runs between tokens, missing spaces
// after commas and an optional trailing period. Lenient mode additionally
// folds letter case, accepts singular/plural disagreement with the declared
// count and collapses consecutive duplicate points; it never coerces
// malformed or out-of-range coordinates.
inline Caption parse_caption(std::string_view s, ParseStrictness mode = ParseStrictness::Strict) {
    return detail::CaptionParser(s, mode).parse();
}

}  // namespace roadnet
