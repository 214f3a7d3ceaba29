#pragma once

namespace milthrow::reference {

// Reference results reported for the original corpora. Reproducing them
// needs the real videos and pretrained feature extractors, which this
// toolkit deliberately does not ship; treat these as regression targets when
// you supply real feature files through the manifest interface.

// Maximum frame-level AUC on the throwing-action corpus, MFNet features,
// no augmentation.
inline constexpr double kAucThrowingMfnet = 86.10;

// Maximum frame-level AUC on the combined corpus, concatenated features,
// mean-normal loss.
inline constexpr double kAucCombinedConcatMeanNormal = 80.13;

// False alarm rate (percent of normal segments above 0.5) on the combined
// corpus. The mean-normal loss should not be worse than the original loss.
inline constexpr double kFarCombinedOriginal = 0.5667;
inline constexpr double kFarCombinedMeanNormal = 0.4696;

}  // namespace milthrow::reference
