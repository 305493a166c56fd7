# Tensor core: primitive operators, parameter store, gradient oracle, FQT1 I/O
