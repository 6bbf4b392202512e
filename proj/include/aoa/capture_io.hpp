#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "aoa/pipeline.hpp"

namespace aoa {

/**
 * Multichannel IQ capture file.
 *
 * Layout (all fields little-endian regardless of host):
 *   bytes 0..7    magic "AOACAPT1"
 *   bytes 8..11   u32 version (currently 1)
 *   bytes 12..15  u32 channel count
 *   bytes 16..23  f64 sample rate [Hz]
 *   bytes 24..31  f64 center frequency [Hz]
 *   bytes 32..39  u64 timestamp (unix seconds; 0 = untimed)
 *   bytes 40..47  u64 samples per channel
 *   payload       channel-major blocks of f32 (I, Q) pairs
 *
 * Channel-major payout keeps per-channel reads sequential.
 */
struct CaptureHeader {
    static constexpr char kMagic[8] = {'A', 'O', 'A', 'C', 'A', 'P', 'T', '1'};
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::size_t kSize = 48;

    std::uint32_t n_channels = 0;
    double sample_rate_hz = 0.0;
    double center_freq_hz = 0.0;
    std::uint64_t timestamp = 0;
    std::uint64_t n_samples = 0;
};

namespace capture_detail {

inline void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
inline void put_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
inline void put_f64(std::uint8_t* p, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(p, bits);
}
inline void put_f32(std::uint8_t* p, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(p, bits);
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}
inline double get_f64(const std::uint8_t* p) {
    std::uint64_t bits = get_u64(p);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}
inline float get_f32(const std::uint8_t* p) {
    std::uint32_t bits = get_u32(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace capture_detail

inline void write_capture(const std::filesystem::path& path, const RxCapture& rx,
                          double center_freq_hz = 0.0, std::uint64_t timestamp = 0) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_capture: cannot open " + path.string());

    std::uint8_t header[CaptureHeader::kSize];
    std::memcpy(header, CaptureHeader::kMagic, 8);
    capture_detail::put_u32(header + 8, CaptureHeader::kVersion);
    capture_detail::put_u32(header + 12, static_cast<std::uint32_t>(rx.n_channels()));
    capture_detail::put_f64(header + 16, rx.sample_rate_hz);
    capture_detail::put_f64(header + 24, center_freq_hz);
    capture_detail::put_u64(header + 32, timestamp);
    capture_detail::put_u64(header + 40, rx.n_samples());
    out.write(reinterpret_cast<const char*>(header), CaptureHeader::kSize);

    std::vector<std::uint8_t> buf;
    for (const auto& channel : rx.samples) {
        buf.resize(channel.size() * 8);
        for (std::size_t i = 0; i < channel.size(); ++i) {
            capture_detail::put_f32(buf.data() + 8 * i, channel[i].real());
            capture_detail::put_f32(buf.data() + 8 * i + 4, channel[i].imag());
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw IoError("write_capture: write failed for " + path.string());
}

inline std::pair<CaptureHeader, RxCapture> read_capture(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_capture: cannot open " + path.string());
    in.seekg(0, std::ios::end);
    auto file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);

    if (file_size < CaptureHeader::kSize)
        throw FormatError("read_capture: file shorter than the 48-byte header (" +
                          std::to_string(file_size) + " bytes)");
    std::uint8_t header[CaptureHeader::kSize];
    in.read(reinterpret_cast<char*>(header), CaptureHeader::kSize);
    if (std::memcmp(header, CaptureHeader::kMagic, 8) != 0)
        throw FormatError("read_capture: bad magic at byte offset 0");
    CaptureHeader h;
    std::uint32_t version = capture_detail::get_u32(header + 8);
    if (version != CaptureHeader::kVersion)
        throw FormatError("read_capture: unsupported version " + std::to_string(version) +
                          " at byte offset 8");
    h.n_channels = capture_detail::get_u32(header + 12);
    h.sample_rate_hz = capture_detail::get_f64(header + 16);
    h.center_freq_hz = capture_detail::get_f64(header + 24);
    h.timestamp = capture_detail::get_u64(header + 32);
    h.n_samples = capture_detail::get_u64(header + 40);
    if (h.n_channels == 0 && h.n_samples > 0)
        throw FormatError("read_capture: zero channels with nonzero sample count");

    std::uint64_t expected = CaptureHeader::kSize + h.n_channels * h.n_samples * 8;
    if (file_size != expected)
        throw FormatError("read_capture: payload length mismatch, expected " +
                          std::to_string(expected) + " bytes, got " +
                          std::to_string(file_size) + " (error at byte offset " +
                          std::to_string(std::min(file_size, expected)) + ")");

    RxCapture rx;
    rx.sample_rate_hz = h.sample_rate_hz;
    rx.samples.resize(h.n_channels);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(h.n_samples) * 8);
    for (std::uint32_t c = 0; c < h.n_channels; ++c) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw FormatError("read_capture: truncated payload in channel " +
                                   std::to_string(c));
        auto& channel = rx.samples[c];
        channel.resize(static_cast<std::size_t>(h.n_samples));
        for (std::size_t i = 0; i < channel.size(); ++i)
            channel[i] = cf{capture_detail::get_f32(buf.data() + 8 * i),
                            capture_detail::get_f32(buf.data() + 8 * i + 4)};
    }
    return {h, std::move(rx)};
}

/// Periodic snapshot scheme: window_s of signal every period_s.
struct SnapshotPlan {
    double window_s = 6e-3;
    double period_s = 1.0;

    void validate() const {
        if (!(window_s > 0.0) || window_s > period_s)
            throw ConfigError("SnapshotPlan: need 0 < window_s <= period_s");
    }
};

/// Windows at t = 0, period, 2*period, ...; a final window that would run past
/// the capture end is dropped.
inline std::vector<RxCapture> segment_snapshots(const RxCapture& rx,
                                                const SnapshotPlan& plan) {
    plan.validate();
    if (rx.sample_rate_hz <= 0.0) throw ConfigError("segment_snapshots: missing sample rate");
    auto window = static_cast<std::uint64_t>(std::llround(plan.window_s * rx.sample_rate_hz));
    auto period = static_cast<std::uint64_t>(std::llround(plan.period_s * rx.sample_rate_hz));
    if (window == 0 || period == 0) throw ConfigError("segment_snapshots: empty window");

    std::vector<RxCapture> windows;
    for (std::uint64_t start = 0; start + window <= rx.n_samples(); start += period) {
        RxCapture w;
        w.sample_rate_hz = rx.sample_rate_hz;
        w.samples.reserve(rx.samples.size());
        for (const auto& channel : rx.samples)
            w.samples.emplace_back(channel.begin() + static_cast<std::ptrdiff_t>(start),
                                   channel.begin() + static_cast<std::ptrdiff_t>(start + window));
        windows.push_back(std::move(w));
    }
    return windows;
}

struct ProcessOptions {
    SnapshotPlan plan;
    std::vector<Estimator> estimators{Estimator::esprit};
    OrderCriterion criterion = OrderCriterion::aic;
    int ground_truth_k = 1;  // used when criterion == ground_truth
};

/// One per-window (per-second) estimate: AoA averaged over the slots the
/// window contains.
struct WindowEstimate {
    int window_index = 0;
    double t_start_s = 0.0;
    bool flagged = false;  // no slot detected; excluded from averaging
    int n_slots = 0;
    int order = 0;  // modal estimated order over the window's slots
    std::map<Estimator, double> angle_deg;
};

/**
 * Replay pipeline: segment the capture, then per window sync once, demodulate
 * every slot the window holds, estimate order and AoA per slot and average.
 * Windows are emitted in time order. A capture shorter than one window (but
 * long enough for a slot) is treated as a single window.
 */
inline std::vector<WindowEstimate> process_capture(const RxCapture& rx,
                                                   const SlotPipeline& pipeline,
                                                   const ProcessOptions& opt) {
    if (rx.n_channels() != pipeline.config().geom.m_elements)
        throw ConfigError("process_capture: channel count does not match the array");

    std::vector<RxCapture> windows = segment_snapshots(rx, opt.plan);
    if (windows.empty() &&
        rx.n_samples() >= static_cast<std::size_t>(pipeline.sounding_span()))
        windows.push_back(rx);

    const int slot_samples = pipeline.config().srs.slot_samples();
    std::vector<WindowEstimate> results;
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const RxCapture& window = windows[wi];
        WindowEstimate we;
        we.window_index = static_cast<int>(wi);
        we.t_start_s = static_cast<double>(wi) * opt.plan.period_s;

        auto first = pipeline.observe(window, slot_samples - 1);
        if (!first.detected) {
            we.flagged = true;
            results.push_back(std::move(we));
            continue;
        }

        std::map<Estimator, std::pair<double, int>> acc;  // sum, count
        std::map<int, int> order_votes;
        for (std::size_t slot_start = static_cast<std::size_t>(first.offset);
             slot_start + static_cast<std::size_t>(pipeline.sounding_span()) <=
             window.n_samples();
             slot_start += static_cast<std::size_t>(slot_samples)) {
            auto obs = slot_start == static_cast<std::size_t>(first.offset)
                           ? first
                           : pipeline.observe_at(window, static_cast<int>(slot_start));
            int k = pipeline.orders(obs).by(opt.criterion, opt.ground_truth_k);
            ++order_votes[k];
            if (k < 1) continue;  // criterion says no signal in this slot
            ++we.n_slots;
            for (Estimator est : opt.estimators) {
                int k_est = est == Estimator::esprit2d
                                ? k
                                : std::min(k, pipeline.config().geom.m_elements - 1);
                try {
                    AngleEstimate a = pipeline.estimate(obs, est, k_est);
                    auto& [sum, count] = acc[est];
                    sum += a.selected_los_deg;
                    ++count;
                } catch (const NumericError&) {
                }
            }
        }

        int best_votes = 0;
        for (auto [k, votes] : order_votes)
            if (votes > best_votes) {
                best_votes = votes;
                we.order = k;
            }
        if (we.n_slots == 0) we.flagged = true;
        for (auto& [est, sc] : acc)
            if (sc.second > 0) we.angle_deg[est] = sc.first / sc.second;
        results.push_back(std::move(we));
    }
    return results;
}

}  // namespace aoa
