# Utils package
