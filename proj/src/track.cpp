#include "racebo/track.hpp"

#include <cmath>
#include <stdexcept>

#include "racebo/csv.hpp"

namespace racebo {

namespace {

double hypot2(double dx, double dy) { return std::sqrt(dx * dx + dy * dy); }

}  // namespace

Track Track::from_waypoints(const std::vector<TrackWaypoint>& waypoints, double spacing) {
    if (waypoints.size() < 16)
        throw std::runtime_error("track needs at least 16 waypoints, got " +
                                 std::to_string(waypoints.size()));
    const double close_gap = hypot2(waypoints.front().x - waypoints.back().x,
                                    waypoints.front().y - waypoints.back().y);
    if (close_gap > 1e-6)
        throw std::runtime_error("track loop is not closed (gap " + format_double(close_gap) +
                                 " m)");

    // cumulative arc length of the raw polyline, with the last point snapped
    // onto the first so the loop closes exactly
    std::vector<TrackWaypoint> wp = waypoints;
    wp.back().x = wp.front().x;
    wp.back().y = wp.front().y;
    std::vector<double> cum(wp.size(), 0.0);
    for (size_t i = 1; i < wp.size(); ++i)
        cum[i] = cum[i - 1] + hypot2(wp[i].x - wp[i - 1].x, wp[i].y - wp[i - 1].y);
    const double raw_length = cum.back();
    if (raw_length <= 0.0) throw std::runtime_error("track has zero length");

    Track t;
    const size_t n = std::max<size_t>(16, static_cast<size_t>(std::round(raw_length / spacing)));
    t.spacing_ = raw_length / static_cast<double>(n);
    t.total_length_ = raw_length;
    t.xs_.resize(n);
    t.ys_.resize(n);
    t.hw_.resize(n);

    // uniform resampling by linear interpolation along the polyline
    size_t seg = 0;
    for (size_t i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) * t.spacing_;
        while (seg + 1 < cum.size() - 1 && cum[seg + 1] <= s) ++seg;
        const double seg_len = cum[seg + 1] - cum[seg];
        const double a = seg_len > 0 ? (s - cum[seg]) / seg_len : 0.0;
        t.xs_[i] = wp[seg].x + a * (wp[seg + 1].x - wp[seg].x);
        t.ys_[i] = wp[seg].y + a * (wp[seg + 1].y - wp[seg].y);
        const double wl = wp[seg].w_left + a * (wp[seg + 1].w_left - wp[seg].w_left);
        const double wr = wp[seg].w_right + a * (wp[seg + 1].w_right - wp[seg].w_right);
        const double hw = std::min(wl, wr);
        if (hw <= 0) throw std::runtime_error("track half width must be positive");
        t.hw_[i] = hw;
    }

    // raw central-difference tangents, then 5-point centered averaging
    std::vector<double> rx(n), ry(n);
    for (size_t i = 0; i < n; ++i) {
        const size_t ip = (i + 1) % n;
        const size_t im = (i + n - 1) % n;
        rx[i] = t.xs_[ip] - t.xs_[im];
        ry[i] = t.ys_[ip] - t.ys_[im];
    }
    t.tx_.resize(n);
    t.ty_.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double sx = 0.0, sy = 0.0;
        for (long k = -2; k <= 2; ++k) {
            const size_t j = static_cast<size_t>((static_cast<long>(i) + k +
                                                  static_cast<long>(n)) %
                                                 static_cast<long>(n));
            sx += rx[j];
            sy += ry[j];
        }
        const double norm = hypot2(sx, sy);
        if (norm <= 0) throw std::runtime_error("degenerate tangent on track");
        t.tx_[i] = sx / norm;
        t.ty_[i] = sy / norm;
    }

    // curvature from the heading rate of the smoothed tangents
    t.curv_.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const size_t ip = (i + 1) % n;
        const size_t im = (i + n - 1) % n;
        double dth = std::atan2(t.ty_[ip], t.tx_[ip]) - std::atan2(t.ty_[im], t.tx_[im]);
        while (dth > M_PI) dth -= 2 * M_PI;
        while (dth < -M_PI) dth += 2 * M_PI;
        t.curv_[i] = dth / (2.0 * t.spacing_);
    }
    return t;
}

Track Track::load(const std::string& path, double spacing) {
    const CsvTable csv = read_csv(path);
    const int cx = csv.column("x_m");
    const int cy = csv.column("y_m");
    const int cl = csv.column("w_left_m");
    const int cr = csv.column("w_right_m");
    if (cx < 0 || cy < 0 || cl < 0 || cr < 0)
        throw std::runtime_error("track csv must have header x_m,y_m,w_left_m,w_right_m");
    std::vector<TrackWaypoint> wp;
    wp.reserve(csv.rows.size());
    for (size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        if (row.size() < 4)
            throw std::runtime_error("malformed track row " + std::to_string(r + 2));
        TrackWaypoint w;
        try {
            w.x = std::stod(row[cx]);
            w.y = std::stod(row[cy]);
            w.w_left = std::stod(row[cl]);
            w.w_right = std::stod(row[cr]);
        } catch (const std::exception&) {
            throw std::runtime_error("malformed track row " + std::to_string(r + 2));
        }
        wp.push_back(w);
    }
    return from_waypoints(wp, spacing);
}

double Track::wrap(double s) const {
    s = std::fmod(s, total_length_);
    if (s < 0) s += total_length_;
    return s;
}

double Track::interp(const std::vector<double>& v, double s) const {
    const double sw = wrap(s);
    const double u = sw / spacing_;
    const size_t i = static_cast<size_t>(u) % v.size();
    const size_t j = (i + 1) % v.size();
    const double a = u - std::floor(u);
    return v[i] + a * (v[j] - v[i]);
}

Vec2 Track::position(double s) const { return {interp(xs_, s), interp(ys_, s)}; }

Vec2 Track::tangent(double s) const {
    const double tx = interp(tx_, s);
    const double ty = interp(ty_, s);
    const double n = hypot2(tx, ty);
    return {tx / n, ty / n};
}

Vec2 Track::normal(double s) const {
    const Vec2 t = tangent(s);
    return {-t.y, t.x};
}

double Track::heading(double s) const {
    const Vec2 t = tangent(s);
    return std::atan2(t.y, t.x);
}

double Track::curvature(double s) const { return interp(curv_, s); }

double Track::half_width(double s) const { return interp(hw_, s); }

double Track::project(const Vec2& point, double s_hint, double window) const {
    const size_t n = xs_.size();
    const long half = std::min<long>(static_cast<long>(window / spacing_) + 1,
                                     static_cast<long>(n / 2));
    const long center =
        static_cast<long>(std::round(wrap(s_hint) / spacing_)) % static_cast<long>(n);

    long best = center;
    double best_d2 = 1e300;
    for (long k = -half; k <= half; ++k) {
        const size_t i = static_cast<size_t>((center + k + 2 * static_cast<long>(n)) %
                                             static_cast<long>(n));
        const double dx = point.x - xs_[i];
        const double dy = point.y - ys_[i];
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<long>(i);
        }
    }

    // refine on the two segments adjacent to the best sample
    double best_s = static_cast<double>(best) * spacing_;
    double best_dist = best_d2;
    for (int seg = -1; seg <= 0; ++seg) {
        const size_t i = static_cast<size_t>((best + seg + static_cast<long>(n)) %
                                             static_cast<long>(n));
        const size_t j = (i + 1) % n;
        const double ex = xs_[j] - xs_[i];
        const double ey = ys_[j] - ys_[i];
        const double len2 = ex * ex + ey * ey;
        if (len2 <= 0) continue;
        double a = ((point.x - xs_[i]) * ex + (point.y - ys_[i]) * ey) / len2;
        a = std::clamp(a, 0.0, 1.0);
        const double px = xs_[i] + a * ex;
        const double py = ys_[i] + a * ey;
        const double dx = point.x - px;
        const double dy = point.y - py;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_dist) {
            best_dist = d2;
            best_s = (static_cast<double>(i) + a) * spacing_;
        }
    }
    return wrap(best_s);
}

ContouringErrors Track::contouring_errors(const Vec2& point, double s_ref) const {
    const Vec2 c = position(s_ref);
    const Vec2 t = tangent(s_ref);
    const double dx = point.x - c.x;
    const double dy = point.y - c.y;
    ContouringErrors e;
    e.lag = t.x * dx + t.y * dy;
    e.cont = -t.y * dx + t.x * dy;
    return e;
}

double Track::boundary_margin(const Vec2& point, double s) const {
    const ContouringErrors e = contouring_errors(point, s);
    return half_width(s) - std::abs(e.cont);
}

}  // namespace racebo
