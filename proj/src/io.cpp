#include "masfm/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "masfm/error.hpp"

namespace masfm {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::string& path) {
  std::ifstream file(path);
  if (!file) {
    throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  return file;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream file(path);
  if (!file) {
    throw Error(ErrorCode::IoError, "cannot write " + path);
  }
  return file;
}

bool content_line(const std::string& line) {
  for (char c : line) {
    if (c == '#') return false;
    if (!std::isspace(static_cast<unsigned char>(c))) return true;
  }
  return false;
}

json camera_to_json(const Camera& camera) {
  return json{{"focal_px", camera.intrinsics.focal_px},
              {"k1", camera.intrinsics.k1},
              {"k2", camera.intrinsics.k2},
              {"width", camera.intrinsics.width},
              {"height", camera.intrinsics.height},
              {"quaternion",
               {camera.pose.rotation.w(), camera.pose.rotation.x(), camera.pose.rotation.y(),
                camera.pose.rotation.z()}},
              {"center", {camera.pose.center.x(), camera.pose.center.y(), camera.pose.center.z()}}};
}

Camera camera_from_json(const json& j) {
  Camera camera;
  camera.intrinsics.focal_px = j.at("focal_px").get<double>();
  camera.intrinsics.k1 = j.at("k1").get<double>();
  camera.intrinsics.k2 = j.at("k2").get<double>();
  camera.intrinsics.width = j.at("width").get<int>();
  camera.intrinsics.height = j.at("height").get<int>();
  const auto& q = j.at("quaternion");
  camera.pose.rotation = Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(),
                                            q.at(2).get<double>(), q.at(3).get<double>());
  camera.pose.rotation.normalize();
  const auto& c = j.at("center");
  camera.pose.center = Eigen::Vector3d(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
  return camera;
}

}  // namespace

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_text_file(const std::string& path, const std::string& contents) {
  auto file = open_output(path);
  file << contents;
}

std::vector<ImageInfo> load_image_list(const std::string& path) {
  auto file = open_input(path);
  std::vector<ImageInfo> images;
  std::string line;
  while (std::getline(file, line)) {
    if (!content_line(line)) continue;
    std::istringstream stream(line);
    ImageInfo info;
    if (!(stream >> info.id >> info.width >> info.height)) {
      throw Error(ErrorCode::IoError, "malformed image list line: " + line);
    }
    double focal = 0.0;
    if (stream >> focal) info.focal_px = focal;
    images.push_back(info);
  }
  return images;
}

void save_image_list(const std::vector<ImageInfo>& images, const std::string& path) {
  std::ostringstream out;
  out << "# image width height [focal_px]\n";
  for (const auto& info : images) {
    out << info.id << " " << info.width << " " << info.height;
    if (info.focal_px) out << " " << format_double(*info.focal_px);
    out << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<FeatureMatch> load_matches(const std::string& path) {
  auto file = open_input(path);
  std::vector<FeatureMatch> matches;
  std::string line;
  while (std::getline(file, line)) {
    if (!content_line(line)) continue;
    std::istringstream stream(line);
    FeatureMatch match;
    if (!(stream >> match.image_a >> match.image_b >> match.pixel_a.x() >> match.pixel_a.y() >>
          match.pixel_b.x() >> match.pixel_b.y())) {
      throw Error(ErrorCode::IoError, "malformed match line: " + line);
    }
    matches.push_back(match);
  }
  return matches;
}

void save_matches(const std::vector<FeatureMatch>& matches, const std::string& path) {
  std::ostringstream out;
  out << "# image_a image_b ua va ub vb\n";
  for (const auto& m : matches) {
    out << m.image_a << " " << m.image_b << " " << format_double(m.pixel_a.x()) << " "
        << format_double(m.pixel_a.y()) << " " << format_double(m.pixel_b.x()) << " "
        << format_double(m.pixel_b.y()) << "\n";
  }
  write_text_file(path, out.str());
}

AnchorFile load_anchor_file(const std::string& path) {
  auto file = open_input(path);
  AnchorFile anchor;
  std::string line;
  bool have_header = false;
  while (std::getline(file, line)) {
    if (!content_line(line)) continue;
    std::istringstream stream(line);
    if (!have_header) {
      std::string image_tag, quat_tag, center_tag, fov_tag;
      double w, x, y, z;
      Eigen::Vector3d center;
      if (!(stream >> image_tag >> anchor.image_id >> quat_tag >> w >> x >> y >> z >> center_tag >>
            center.x() >> center.y() >> center.z() >> fov_tag >> anchor.fov_deg) ||
          image_tag != "image" || quat_tag != "init_quat" || center_tag != "init_center" ||
          fov_tag != "fov_deg") {
        throw Error(ErrorCode::IoError, "malformed anchor header in " + path);
      }
      anchor.initial_pose.rotation = Eigen::Quaterniond(w, x, y, z);
      anchor.initial_pose.rotation.normalize();
      anchor.initial_pose.center = center;
      have_header = true;
      continue;
    }
    Correspondence2D3D corr;
    if (!(stream >> corr.pixel.x() >> corr.pixel.y() >> corr.point.x() >> corr.point.y() >>
          corr.point.z())) {
      throw Error(ErrorCode::IoError, "malformed anchor correspondence in " + path);
    }
    anchor.correspondences.push_back(corr);
  }
  if (!have_header) {
    throw Error(ErrorCode::IoError, "anchor file missing header: " + path);
  }
  return anchor;
}

void save_anchor_file(const AnchorFile& anchor, const std::string& path) {
  std::ostringstream out;
  const auto& q = anchor.initial_pose.rotation;
  const auto& c = anchor.initial_pose.center;
  out << "image " << anchor.image_id << " init_quat " << format_double(q.w()) << " "
      << format_double(q.x()) << " " << format_double(q.y()) << " " << format_double(q.z())
      << " init_center " << format_double(c.x()) << " " << format_double(c.y()) << " "
      << format_double(c.z()) << " fov_deg " << format_double(anchor.fov_deg) << "\n";
  for (const auto& corr : anchor.correspondences) {
    out << format_double(corr.pixel.x()) << " " << format_double(corr.pixel.y()) << " "
        << format_double(corr.point.x()) << " " << format_double(corr.point.y()) << " "
        << format_double(corr.point.z()) << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<Correspondence2D3D> load_annotation_lines(const std::string& path) {
  auto file = open_input(path);
  std::vector<Correspondence2D3D> annotations;
  std::string line;
  while (std::getline(file, line)) {
    if (!content_line(line)) continue;
    std::istringstream stream(line);
    Correspondence2D3D corr;
    if (!(stream >> corr.pixel.x() >> corr.pixel.y() >> corr.point.x() >> corr.point.y() >>
          corr.point.z())) {
      throw Error(ErrorCode::IoError, "malformed annotation line in " + path);
    }
    annotations.push_back(corr);
  }
  return annotations;
}

void save_annotation_lines(const std::vector<Correspondence2D3D>& annotations,
                           const std::string& path) {
  std::ostringstream out;
  out << "# u v X Y Z\n";
  for (const auto& corr : annotations) {
    out << format_double(corr.pixel.x()) << " " << format_double(corr.pixel.y()) << " "
        << format_double(corr.point.x()) << " " << format_double(corr.point.y()) << " "
        << format_double(corr.point.z()) << "\n";
  }
  write_text_file(path, out.str());
}

std::map<ImageId, Camera> load_cameras_json(const std::string& path) {
  auto file = open_input(path);
  json doc = json::parse(file);
  std::map<ImageId, Camera> cameras;
  for (const auto& [id, value] : doc.at("cameras").items()) {
    cameras[id] = camera_from_json(value);
  }
  return cameras;
}

void save_cameras_json(const std::map<ImageId, Camera>& cameras, const std::string& path) {
  json doc;
  doc["cameras"] = json::object();
  for (const auto& [id, camera] : cameras) {
    doc["cameras"][id] = camera_to_json(camera);
  }
  write_text_file(path, doc.dump(2) + "\n");
}

std::vector<PointRecord> load_points(const std::string& path) {
  auto file = open_input(path);
  std::vector<PointRecord> points;
  std::string line;
  while (std::getline(file, line)) {
    if (!content_line(line)) continue;
    std::istringstream stream(line);
    PointRecord record;
    if (!(stream >> record.id >> record.point.x() >> record.point.y() >> record.point.z() >>
          record.observation_count)) {
      throw Error(ErrorCode::IoError, "malformed point line: " + line);
    }
    points.push_back(record);
  }
  return points;
}

void save_points(const std::vector<PointRecord>& points, const std::string& path) {
  std::ostringstream out;
  out << "# id X Y Z n_obs\n";
  for (const auto& record : points) {
    out << record.id << " " << format_double(record.point.x()) << " "
        << format_double(record.point.y()) << " " << format_double(record.point.z()) << " "
        << record.observation_count << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<Eigen::Vector3d> load_point_list(const std::string& path) {
  auto file = open_input(path);
  std::vector<Eigen::Vector3d> points;
  std::string line;
  while (std::getline(file, line)) {
    if (!content_line(line)) continue;
    std::istringstream stream(line);
    Eigen::Vector3d p;
    if (!(stream >> p.x() >> p.y() >> p.z())) {
      throw Error(ErrorCode::IoError, "malformed point line: " + line);
    }
    points.push_back(p);
  }
  return points;
}

void save_point_list(const std::vector<Eigen::Vector3d>& points, const std::string& path) {
  std::ostringstream out;
  out << "# X Y Z\n";
  for (const auto& p : points) {
    out << format_double(p.x()) << " " << format_double(p.y()) << " " << format_double(p.z())
        << "\n";
  }
  write_text_file(path, out.str());
}

NamedBundleProblem load_bundle_problem_json(const std::string& path) {
  auto file = open_input(path);
  json doc = json::parse(file);

  NamedBundleProblem named;
  std::map<ImageId, int> index_of;
  for (const auto& [id, value] : doc.at("cameras").items()) {
    index_of[id] = static_cast<int>(named.image_ids.size());
    named.image_ids.push_back(id);
    named.problem.cameras.push_back(camera_from_json(value));
  }

  const std::string mode = doc.value("mode", "classic");
  if (mode == "classic") {
    named.problem.mode = BundleMode::Classic;
  } else if (mode == "hard") {
    named.problem.mode = BundleMode::HardConstrained;
  } else if (mode == "soft") {
    named.problem.mode = BundleMode::SoftConstrained;
  } else {
    throw Error(ErrorCode::IoError, "unknown bundle mode: " + mode);
  }
  named.problem.anchor_weight = doc.value("anchor_weight", 100.0);

  for (const auto& id : doc.value("anchors", std::vector<std::string>{})) {
    auto it = index_of.find(id);
    if (it == index_of.end()) {
      throw Error(ErrorCode::IoError, "anchor id not among cameras: " + id);
    }
    named.problem.anchor_indices.push_back(it->second);
  }

  for (const auto& track_json : doc.at("tracks")) {
    BundleTrack track;
    const auto& p = track_json.at("point");
    track.point = Eigen::Vector3d(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    for (const auto& obs_json : track_json.at("observations")) {
      BundleObservation obs;
      const std::string id = obs_json.at("image").get<std::string>();
      auto it = index_of.find(id);
      if (it == index_of.end()) {
        throw Error(ErrorCode::IoError, "observation image not among cameras: " + id);
      }
      obs.camera = it->second;
      const auto& pix = obs_json.at("pixel");
      obs.pixel = Eigen::Vector2d(pix.at(0).get<double>(), pix.at(1).get<double>());
      track.observations.push_back(obs);
    }
    named.problem.tracks.push_back(std::move(track));
  }
  return named;
}

void save_bundle_problem_json(const NamedBundleProblem& named, const std::string& path) {
  json doc;
  doc["mode"] = bundle_mode_name(named.problem.mode);
  doc["anchor_weight"] = named.problem.anchor_weight;
  doc["cameras"] = json::object();
  for (std::size_t i = 0; i < named.problem.cameras.size(); ++i) {
    doc["cameras"][named.image_ids[i]] = camera_to_json(named.problem.cameras[i]);
  }
  doc["anchors"] = json::array();
  for (int idx : named.problem.anchor_indices) {
    doc["anchors"].push_back(named.image_ids[idx]);
  }
  doc["tracks"] = json::array();
  for (const auto& track : named.problem.tracks) {
    json track_json;
    track_json["point"] = {track.point.x(), track.point.y(), track.point.z()};
    track_json["observations"] = json::array();
    for (const auto& obs : track.observations) {
      track_json["observations"].push_back(
          {{"image", named.image_ids[obs.camera]}, {"pixel", {obs.pixel.x(), obs.pixel.y()}}});
    }
    doc["tracks"].push_back(track_json);
  }
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace masfm
