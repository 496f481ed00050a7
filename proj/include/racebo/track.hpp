#pragma once

#include <string>
#include <vector>

namespace racebo {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct TrackWaypoint {
    double x = 0.0;       // [m]
    double y = 0.0;       // [m]
    double w_left = 0.0;  // lateral half width to the left boundary [m]
    double w_right = 0.0; // [m]
};

struct ContouringErrors {
    double lag = 0.0;   // signed, along the tangent [m]
    double cont = 0.0;  // signed, along the left normal [m]
};

// Closed centerline, resampled to uniform arc spacing. Immutable after load;
// all queries are const.
class Track {
public:
    // Builds the resampled representation from raw waypoints. The loop must be
    // closed (first == last within 1e-6 m) and have at least 16 points.
    static Track from_waypoints(const std::vector<TrackWaypoint>& waypoints,
                                double spacing = 0.02);

    // CSV with header x_m,y_m,w_left_m,w_right_m.
    static Track load(const std::string& path, double spacing = 0.02);

    double total_length() const { return total_length_; }
    size_t sample_count() const { return xs_.size(); }
    double spacing() const { return spacing_; }

    double wrap(double s) const;

    Vec2 position(double s) const;
    Vec2 tangent(double s) const;   // unit
    Vec2 normal(double s) const;    // unit, left of tangent
    double heading(double s) const; // tangent angle [rad]
    double curvature(double s) const;
    double half_width(double s) const;  // min(w_left, w_right), interpolated

    // Locally nearest arc position to the point, searched within +/- `window`
    // meters of s_hint (wrapped). Sub-sample resolution via segment projection.
    double project(const Vec2& point, double s_hint, double window = 2.0) const;

    // Tangential/normal decomposition of (point - centerline(s_ref)).
    ContouringErrors contouring_errors(const Vec2& point, double s_ref) const;

    // half_width(s) - |e_cont|; negative means outside the track.
    double boundary_margin(const Vec2& point, double s) const;

private:
    double interp(const std::vector<double>& v, double s) const;

    std::vector<double> xs_, ys_;        // uniform samples of the centerline
    std::vector<double> tx_, ty_;        // smoothed unit tangents
    std::vector<double> curv_;           // curvature at samples [1/m]
    std::vector<double> hw_;             // half widths at samples [m]
    double spacing_ = 0.02;              // actual uniform spacing after resampling
    double total_length_ = 0.0;
};

}  // namespace racebo
