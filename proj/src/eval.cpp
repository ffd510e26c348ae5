// Copyright (c) 2026 The TimeBalance Authors. All Rights Reserved.
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

#include "timebalance/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "timebalance/common.hpp"

namespace tb {

const double kEvalScales[3] = {1.0, 0.875, 0.75};

std::vector<int> clip_start_schedule(int total_frames, int clip_len, int num_clips) {
  check_contract(num_clips >= 1, "need at least one clip");
  if (total_frames < clip_len)
    throw DataError("video shorter than one clip (" + std::to_string(total_frames) + " < " +
                    std::to_string(clip_len) + " frames)");
  if (num_clips == 1) return {0};
  std::vector<int> starts;
  const std::int64_t span = total_frames - clip_len;
  for (int k = 0; k < num_clips; ++k)
    starts.push_back(static_cast<int>(span * k / (num_clips - 1)));
  return starts;
}

Vec predict_video(const EncoderWeights& net, const Video& video, const EvalProtocol& protocol) {
  check_contract(protocol.num_scales >= 1 && protocol.num_scales <= 3,
                 "between 1 and 3 spatial scales are supported");
  const auto starts = clip_start_schedule(video.frames, protocol.clip_len, protocol.num_clips);

  Vec sum = Vec::Zero(net.num_classes());
  const std::size_t frame_elems =
      static_cast<std::size_t>(video.height) * video.width * video.channels;
  for (const int start : starts) {
    Video clip(protocol.clip_len, video.height, video.width, video.channels);
    std::copy_n(video.data.begin() + static_cast<std::ptrdiff_t>(start) * frame_elems,
                frame_elems * protocol.clip_len, clip.data.begin());
    for (int si = 0; si < protocol.num_scales; ++si) {
      const Video crop =
          center_crop_resize(clip, kEvalScales[si], protocol.input_size, protocol.input_size);
      const auto feat = net.encode_clip(to_volume<float>(crop));
      sum += softmax(net.classify_logits(feat.pooled).cast<double>());
    }
  }
  return sum / static_cast<double>(starts.size() * protocol.num_scales);
}

EvalReport evaluate(const EncoderWeights& net, const std::vector<const VideoInstance*>& test_set,
                    const EvalProtocol& protocol) {
  if (test_set.empty()) throw DataError("empty test set");
  EvalReport report;
  report.protocol = protocol;
  std::map<int, int> correct;
  for (const auto* v : test_set) {
    check_contract(v->label.has_value(), "evaluation requires labeled instances");
    const Vec p = predict_video(net, v->video, protocol);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < p.size(); ++c)
      if (p[c] > p[best]) best = c;  // ties resolve to the lower class index
    report.class_counts[*v->label] += 1;
    if (static_cast<int>(best) == *v->label) correct[*v->label] += 1;
    ++report.num_videos;
  }
  int total_correct = 0;
  for (const auto& [cls, count] : report.class_counts) {
    const int c = correct.count(cls) ? correct[cls] : 0;
    report.per_class[cls] = static_cast<double>(c) / static_cast<double>(count);
    total_correct += c;
  }
  report.top1 = static_cast<double>(total_correct) / static_cast<double>(report.num_videos);
  return report;
}

std::vector<std::pair<int, double>> classwise_delta(const EvalReport& report_distinctive,
                                                    const EvalReport& report_invariant) {
  check_contract(report_distinctive.per_class.size() == report_invariant.per_class.size(),
                 "class sets differ");
  std::vector<std::pair<int, double>> deltas;
  for (const auto& [cls, acc_d] : report_distinctive.per_class) {
    const auto it = report_invariant.per_class.find(cls);
    check_contract(it != report_invariant.per_class.end(), "class sets differ");
    deltas.emplace_back(cls, acc_d - it->second);
  }
  std::stable_sort(deltas.begin(), deltas.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return deltas;
}

void write_delta_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<int, double>>& deltas, int k) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write delta csv: " + path.string());
  os << "rank,class,delta,extreme\n";
  const auto n = static_cast<int>(deltas.size());
  char buf[64];
  for (int i = 0; i < n; ++i) {
    const bool top = i < k;
    const bool bottom = i >= n - k;
    if (!top && !bottom) continue;
    std::snprintf(buf, sizeof(buf), "%.17g", deltas[i].second);
    os << i << ',' << deltas[i].first << ',' << buf << ',' << (top ? "top" : "bottom") << '\n';
  }
}

}  // namespace tb
