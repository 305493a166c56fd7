# Network modules: wavelet, backbone, MFEA, FGBR, MBGD, supervision, metrics
