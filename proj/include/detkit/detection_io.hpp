// Copyright 2026 The detkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "detkit/boxes.hpp"

namespace detkit {

// One JSONL record: {"frame": int, "class": str, "score": float, "box": [..]}.
// A 2D box is [x1,y1,x2,y2] corner pixels, a 3D box [cx,cy,cz,w,l,h,yaw].
// Ground-truth files use the same layout (score conventionally 1).
struct DetectionRecord {
  int frame = 0;
  std::string cls;
  double score = 0.0;
  std::vector<double> box;

  bool is_3d() const { return box.size() == 7; }

  Box2D box2d() const {
    if (box.size() != 4) throw std::runtime_error("detection record: not a 2d box");
    return Box2D{static_cast<float>(box[0]), static_cast<float>(box[1]),
                 static_cast<float>(box[2]), static_cast<float>(box[3])};
  }
  Box3D box3d() const {
    if (box.size() != 7) throw std::runtime_error("detection record: not a 3d box");
    Box3D b;
    b.cx = static_cast<float>(box[0]);
    b.cy = static_cast<float>(box[1]);
    b.cz = static_cast<float>(box[2]);
    b.w = static_cast<float>(box[3]);
    b.l = static_cast<float>(box[4]);
    b.h = static_cast<float>(box[5]);
    b.yaw = static_cast<float>(box[6]);
    return b;
  }
};

inline std::string detection_to_json_line(const DetectionRecord& r) {
  nlohmann::json j;
  j["frame"] = r.frame;
  j["class"] = r.cls;
  j["score"] = r.score;
  j["box"] = r.box;
  return j.dump();
}

inline void write_detections_jsonl(const std::string& path,
                                   const std::vector<DetectionRecord>& records) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("detections: cannot open for write: " + path);
  for (const auto& r : records) f << detection_to_json_line(r) << "\n";
}

inline std::vector<DetectionRecord> read_detections_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("detections: cannot open: " + path);
  std::vector<DetectionRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("detections: " + path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
    DetectionRecord r;
    r.frame = j.at("frame").get<int>();
    r.cls = j.at("class").get<std::string>();
    r.score = j.value("score", 1.0);
    r.box = j.at("box").get<std::vector<double>>();
    if (r.box.size() != 4 && r.box.size() != 7) {
      throw std::runtime_error("detections: " + path + ":" + std::to_string(line_no) +
                               ": box must have 4 or 7 values");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detkit
