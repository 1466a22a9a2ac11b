#include "xfg/landmarks.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace xfg {
namespace {

// Mean-face template for the 68-point scheme, normalized so the outer eye
// corners and the chin span roughly the unit square. Widely used for 2D face
// alignment; it is a stand-in for a dataset-specific mean shape.
constexpr std::array<Point2, kRawLandmarkCount> kMeanFace = {{
    {0.0792396913815, 0.339223741112}, {0.0829219487236, 0.456955367943},
    {0.0967927109165, 0.575648016728}, {0.122141515615, 0.691921601066},
    {0.168687863544, 0.800341263616},  {0.239789390707, 0.895732504778},
    {0.325662452515, 0.977068762493},  {0.422318282013, 1.04329000149},
    {0.531777802068, 1.06080371126},   {0.641296298053, 1.03981924107},
    {0.738105872266, 0.972268833998},  {0.824444363295, 0.889624082279},
    {0.894792677532, 0.792494155836},  {0.939395486253, 0.681546643421},
    {0.96111933829, 0.562238253072},   {0.970579841181, 0.441758925744},
    {0.971193274221, 0.322118743967},  {0.163846223133, 0.249151738053},
    {0.21780354657, 0.204255863861},   {0.291299351124, 0.192367318323},
    {0.367460241458, 0.203582210627},  {0.4392945113, 0.233135599851},
    {0.586445962425, 0.228141644834},  {0.660152671635, 0.195923841854},
    {0.737466449096, 0.182360984545},  {0.813236546239, 0.192828009114},
    {0.8707571886, 0.235293377042},    {0.51534533827, 0.31863546193},
    {0.516221448289, 0.396200446263},  {0.517118861835, 0.473797687758},
    {0.51816430343, 0.553157797772},   {0.433701156035, 0.604054457668},
    {0.475501237769, 0.62076344024},   {0.520712933176, 0.634268222208},
    {0.565874114041, 0.618796581487},  {0.607054002672, 0.60157671656},
    {0.252418718401, 0.331052263829},  {0.298663015648, 0.302646354002},
    {0.355749724218, 0.303020650651},  {0.403718978315, 0.33867711083},
    {0.352507175597, 0.349987615384},  {0.296791759886, 0.350478978225},
    {0.631326076346, 0.334136672344},  {0.679073381078, 0.29645404267},
    {0.73597236153, 0.294721285802},   {0.782865376271, 0.321305281656},
    {0.740312274764, 0.341849376713},  {0.68499850091, 0.343734332172},
    {0.353167761422, 0.746189164237},  {0.414587777921, 0.719053835073},
    {0.477677654595, 0.706835892494},  {0.522732900812, 0.717092275768},
    {0.569832064287, 0.705414478982},  {0.635195811927, 0.71565572516},
    {0.69951672331, 0.739419187253},   {0.639447159575, 0.805236879972},
    {0.576410514055, 0.835436670169},  {0.525398405766, 0.841706377792},
    {0.47641545769, 0.837505914975},   {0.41379548902, 0.810045601727},
    {0.380084785646, 0.749979603086},  {0.477955996282, 0.74513234612},
    {0.523389793327, 0.748924302636},  {0.571057789237, 0.74332894691},
    {0.672409137852, 0.744177032192},  {0.572539621444, 0.776609286626},
    {0.5240106503, 0.783370783245},    {0.478561346397, 0.778476346951},
}};

// Placement of the template inside a 224x224 frame.
constexpr double kRefSize = 224.0;
constexpr double kOffsetX = 24.0, kScaleX = 176.0;
constexpr double kOffsetY = 40.0, kScaleY = 160.0;

std::size_t expected_count(LandmarkKind kind) {
  return kind == LandmarkKind::raw68 ? kRawLandmarkCount : kAugmentedLandmarkCount;
}

void check_bounds(const std::vector<Point2>& pts, int w, int h) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 ||
        p.x > w - 1 || p.y > h - 1) {
      std::ostringstream msg;
      msg << "landmark " << i << " (" << p.x << "," << p.y << ") outside image " << w << "x" << h;
      throw Error(msg.str());
    }
  }
}

std::vector<Point2> parse_points(std::istream& in, const std::string& source) {
  std::vector<Point2> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(source + ": expected \"x,y\", got \"" + line + "\"");
    try {
      std::size_t used = 0;
      Point2 p;
      p.x = std::stod(line.substr(0, comma), &used);
      p.y = std::stod(line.substr(comma + 1), &used);
      pts.push_back(p);
    } catch (const std::logic_error&) {
      throw Error(source + ": bad number in \"" + line + "\"");
    }
  }
  return pts;
}

void write_points(std::ostream& out, const std::vector<Point2>& pts) {
  out.precision(17);
  for (const auto& p : pts) out << p.x << "," << p.y << "\n";
}

}  // namespace

LandmarkSet::LandmarkSet(std::vector<Point2> points, LandmarkKind kind, int image_width,
                         int image_height)
    : points_(std::move(points)), kind_(kind), width_(image_width), height_(image_height) {
  if (width_ <= 0 || height_ <= 0) throw Error("landmark frame must have positive size");
  if (points_.size() != expected_count(kind_)) {
    throw Error("expected " + std::to_string(expected_count(kind_)) + " landmarks, got " +
                std::to_string(points_.size()));
  }
  check_bounds(points_, width_, height_);
}

LandmarkSet augment_landmarks(const LandmarkSet& raw) {
  if (raw.kind() != LandmarkKind::raw68) throw Error("augment_landmarks expects a 68-point set");
  const int w = raw.image_width();
  const int h = raw.image_height();
  std::vector<Point2> pts = raw.points();
  pts.reserve(kAugmentedLandmarkCount);
  for (int i = 1; i <= kTopBorderCount; ++i) {
    pts.push_back({std::round(i * (w - 1) / double(kTopBorderCount + 1)), 0.0});
  }
  pts.push_back({0.0, 0.0});
  pts.push_back({double(w - 1), 0.0});
  pts.push_back({0.0, double(h - 1)});
  pts.push_back({double(w - 1), double(h - 1)});
  return LandmarkSet(std::move(pts), LandmarkKind::augmented89, w, h);
}

void StandardLayout::validate() const {
  if (width <= 0 || height <= 0) throw Error("layout must have positive size");
  if (points.size() != kAugmentedLandmarkCount)
    throw Error("layout must have 89 points, got " + std::to_string(points.size()));
  check_bounds(points, width, height);
  const Point2 corners[4] = {{0.0, 0.0}, {double(width - 1), 0.0}, {0.0, double(height - 1)},
                             {double(width - 1), double(height - 1)}};
  for (int c = 0; c < 4; ++c) {
    if (points[lm::kCornerBegin + c] != corners[c]) throw Error("layout corner points must match the frame corners");
  }
}

LandmarkSet StandardLayout::as_landmarks() const {
  return LandmarkSet(points, LandmarkKind::augmented89, width, height);
}

StandardLayout default_layout() { return default_layout(224, 224); }

StandardLayout default_layout(int width, int height) {
  if (width < 2 || height < 2) throw Error("layout must be at least 2x2");
  const double sx = (width - 1) / (kRefSize - 1);
  const double sy = (height - 1) / (kRefSize - 1);
  std::vector<Point2> raw;
  raw.reserve(kRawLandmarkCount);
  for (const auto& p : kMeanFace) {
    raw.push_back({(kOffsetX + p.x * kScaleX) * sx, (kOffsetY + p.y * kScaleY) * sy});
  }
  auto augmented = augment_landmarks(LandmarkSet(std::move(raw), LandmarkKind::raw68, width, height));
  StandardLayout layout{augmented.points(), width, height};
  layout.validate();
  return layout;
}

LandmarkSet read_landmarks_csv(const std::filesystem::path& path, int image_width, int image_height) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  auto pts = parse_points(in, path.string());
  if (pts.size() != kRawLandmarkCount)
    throw Error(path.string() + ": expected 68 landmark rows, got " + std::to_string(pts.size()));
  return LandmarkSet(std::move(pts), LandmarkKind::raw68, image_width, image_height);
}

void write_landmarks_csv(const std::filesystem::path& path, const std::vector<Point2>& points) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_points(out, points);
}

StandardLayout read_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  StandardLayout layout;
  auto header = [&](const char* key) {
    std::string line;
    if (!std::getline(in, line)) throw Error(path.string() + ": missing layout header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string prefix = std::string(key) + "=";
    if (line.rfind(prefix, 0) != 0) throw Error(path.string() + ": expected \"" + prefix + "<n>\"");
    try {
      return std::stoi(line.substr(prefix.size()));
    } catch (const std::logic_error&) {
      throw Error(path.string() + ": bad " + key);
    }
  };
  layout.width = header("width");
  layout.height = header("height");
  layout.points = parse_points(in, path.string());
  layout.validate();
  return layout;
}

void write_layout(const std::filesystem::path& path, const StandardLayout& layout) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "width=" << layout.width << "\nheight=" << layout.height << "\n";
  write_points(out, layout.points);
}

}  // namespace xfg
